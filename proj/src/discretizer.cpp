#include "riskmdp/discretizer.hpp"

#include "riskmdp/errors.hpp"
#include "text.hpp"

#include <cmath>
#include <fstream>

namespace riskmdp {

int FeatureBinning::code(double value) const noexcept {
    if (categorical || !(value >= lower))
        return 0;
    const double k = std::floor((value - lower) / width);
    if (k >= static_cast<double>(count - 1))
        return count - 1;
    return static_cast<int>(k);
}

BinningScheme BinningScheme::standard() {
    return {{
        {"http_requests", 0.0, 50.0, 10.0, 5, false},
        {"unique_users", 0.0, 50.0, 10.0, 5, false},
        {"req_user_ratio", 1.0, 4.0, 0.75, 4, false},
        {"avg_bytes_sent", 800.0, 1300.0, 125.0, 4, false},
        {"avg_latency", 100.0, 3500.0, 850.0, 4, false},
        {"avg_response_time", 0.0, 8000.0, 2000.0, 4, false},
        {"dos", 0.0, 8.0, 1.0, kDosCodes, true},
    }};
}

BinningScheme BinningScheme::binary() {
    auto scheme = standard();
    for (auto& f : scheme.features) {
        if (f.categorical)
            continue;
        f.count = 2;
        f.width = (f.upper - f.lower) / 2.0;
    }
    return scheme;
}

void BinningScheme::validate() const {
    if (features.empty())
        throw ConfigError("binning scheme has no features");
    for (const auto& f : features) {
        if (f.count < 1)
            throw ConfigError("feature '" + f.name + "' needs at least one bin");
        if (f.categorical)
            continue;
        if (!(f.upper > f.lower) || !(f.width > 0.0))
            throw ConfigError("feature '" + f.name + "' has an empty range or non-positive width");
        const double span = f.upper - f.lower;
        if (f.count * f.width < span * (1.0 - 1e-12))
            throw ConfigError("feature '" + f.name + "': bins do not cover [lower, upper)");
    }
}

void BinningScheme::validate_record_layout() const {
    validate();
    if (features.size() != kFeatureCount)
        throw ConfigError("binning scheme must describe exactly 7 features");
    for (std::size_t i = 0; i < kDosFeature; ++i)
        if (features[i].categorical)
            throw ConfigError("feature '" + features[i].name + "' must be continuous");
    if (!features[kDosFeature].categorical || features[kDosFeature].count != kDosCodes)
        throw ConfigError("the DoS feature must be categorical with 8 codes");
}

std::array<int, kFeatureCount> BinningScheme::radices() const {
    if (features.size() != kFeatureCount)
        throw ConfigError("binning scheme must describe exactly 7 features");
    std::array<int, kFeatureCount> r{};
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        r[i] = features[i].count;
    return r;
}

DiscreteState discretize(const FeatureRecord& record, const BinningScheme& scheme) {
    const double values[kDosFeature] = {record.http_requests, record.unique_users, record.req_user_ratio,
                                        record.avg_bytes_sent, record.avg_latency, record.avg_response_time};
    DiscreteState s;
    for (std::size_t i = 0; i < kDosFeature; ++i)
        s.codes[i] = scheme.features[i].code(values[i]);
    s.codes[kDosFeature] = dos_code(record.dos);
    return s;
}

std::uint64_t state_space_size(const BinningScheme& scheme) {
    std::uint64_t n = 1;
    for (const auto& f : scheme.features)
        n *= static_cast<std::uint64_t>(f.count);
    return n;
}

std::size_t state_index(const DiscreteState& state, const BinningScheme& scheme) {
    std::size_t index = 0;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const int n = scheme.features[i].count;
        if (state.codes[i] < 0 || state.codes[i] >= n)
            throw std::out_of_range("state code out of range for feature '" + scheme.features[i].name + "'");
        index = index * static_cast<std::size_t>(n) + static_cast<std::size_t>(state.codes[i]);
    }
    return index;
}

DiscreteState state_from_index(std::size_t index, const BinningScheme& scheme) {
    if (index >= state_space_size(scheme))
        throw std::out_of_range("state index " + std::to_string(index) + " out of range");
    DiscreteState s;
    for (std::size_t i = kFeatureCount; i-- > 0;) {
        const auto n = static_cast<std::size_t>(scheme.features[i].count);
        s.codes[i] = static_cast<int>(index % n);
        index /= n;
    }
    return s;
}

std::vector<DiscreteState> enumerate_states(const BinningScheme& scheme, std::size_t max_states) {
    const auto radix = scheme.radices();
    const auto total = state_space_size(scheme);
    if (total > max_states)
        throw ConfigError("state space of " + std::to_string(total) + " states exceeds the enumeration budget");

    std::vector<DiscreteState> states;
    states.reserve(static_cast<std::size_t>(total));
    DiscreteState current;
    for (std::uint64_t k = 0; k < total; ++k) {
        states.push_back(current);
        // odometer increment, last feature fastest
        for (std::size_t i = kFeatureCount; i-- > 0;) {
            if (++current.codes[i] < radix[i])
                break;
            current.codes[i] = 0;
        }
    }
    return states;
}

DiscreteTrajectory discretize_all(const std::vector<FeatureRecord>& records, const BinningScheme& scheme) {
    scheme.validate_record_layout();
    DiscreteTrajectory out;
    out.states.reserve(records.size());
    out.indices.reserve(records.size());
    for (const auto& r : records) {
        out.states.push_back(discretize(r, scheme));
        out.indices.push_back(state_index(out.states.back(), scheme));
    }
    return out;
}

void save_trajectory(const std::filesystem::path& path, const DiscreteTrajectory& trajectory) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write trajectory file " + path.string());
    out << "http_requests,unique_users,req_user_ratio,avg_bytes_sent,avg_latency,avg_response_time,dos,index\n";
    for (std::size_t t = 0; t < trajectory.states.size(); ++t) {
        for (int c : trajectory.states[t].codes)
            out << c << ',';
        out << trajectory.indices[t] << '\n';
    }
}

DiscreteTrajectory load_trajectory(const std::filesystem::path& path, const BinningScheme& scheme) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open trajectory file " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("missing header", 1);

    DiscreteTrajectory out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty())
            continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() != kFeatureCount + 1)
            throw ParseError("expected 8 fields", line_no);
        DiscreteState s;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            auto v = detail::parse_int(fields[i]);
            if (!v)
                throw ParseError("invalid code '" + std::string(fields[i]) + "'", line_no);
            s.codes[i] = static_cast<int>(*v);
        }
        auto idx = detail::parse_int(fields[kFeatureCount]);
        std::size_t expected = 0;
        try {
            expected = state_index(s, scheme);
        } catch (const std::out_of_range& e) {
            throw ParseError(e.what(), line_no);
        }
        if (!idx || static_cast<std::size_t>(*idx) != expected)
            throw ValidationError("row " + std::to_string(line_no) + ": index column disagrees with codes");
        out.states.push_back(s);
        out.indices.push_back(expected);
    }
    return out;
}

} // namespace riskmdp
