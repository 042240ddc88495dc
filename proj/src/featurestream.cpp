#include "riskmdp/featurestream.hpp"

#include "riskmdp/errors.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace riskmdp {

namespace {

// Observation ranges of the six continuous features.
constexpr double kMaxRequests = 50.0;
constexpr double kMaxUsers = 50.0;
constexpr double kMinRatio = 1.0;
constexpr double kMaxRatio = 4.0;
constexpr double kMinBytes = 800.0;
constexpr double kMaxBytes = 1300.0;
constexpr double kMinLatency = 100.0;
constexpr double kMaxLatency = 3500.0;
constexpr double kMaxResponse = 8000.0;

const char* const kHeader =
    "t,http_requests,unique_users,req_user_ratio,avg_bytes_sent,avg_latency,avg_response_time,syn,udp,icmp";

bool parse_flag(std::string_view field, std::size_t row, const char* name) {
    if (field == "0")
        return false;
    if (field == "1")
        return true;
    throw ParseError(std::string("field '") + name + "' must be 0 or 1, got '" + std::string(field) + "'", row);
}

} // namespace

std::string to_string(AttackType type) {
    switch (type) {
    case AttackType::syn:
        return "syn";
    case AttackType::udp:
        return "udp";
    case AttackType::icmp:
        return "icmp";
    }
    return "unknown";
}

AttackType attack_type_from_string(const std::string& name) {
    if (name == "syn")
        return AttackType::syn;
    if (name == "udp")
        return AttackType::udp;
    if (name == "icmp")
        return AttackType::icmp;
    throw ConfigError("unknown attack type '" + name + "'");
}

double request_user_ratio(double http_requests, double unique_users) noexcept {
    return unique_users > 0.0 ? http_requests / unique_users : 0.0;
}

void validate_record(const FeatureRecord& r, double ratio_tolerance) {
    const double values[] = {r.http_requests, r.unique_users, r.req_user_ratio,
                             r.avg_bytes_sent, r.avg_latency, r.avg_response_time};
    if (r.t < 0)
        throw ValidationError("negative time step " + std::to_string(r.t));
    for (double v : values)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ValidationError("feature value out of domain at t=" + std::to_string(r.t));
    const double expected = request_user_ratio(r.http_requests, r.unique_users);
    if (std::abs(expected - r.req_user_ratio) > ratio_tolerance)
        throw ValidationError("req_user_ratio " + detail::format_double(r.req_user_ratio) + " does not match " +
                              detail::format_double(expected) + " at t=" + std::to_string(r.t));
}

void SimulationConfig::validate() const {
    if (duration_steps <= 0)
        throw ConfigError("duration_steps must be positive");
    if (!(load_persistence >= 0.0 && load_persistence < 1.0))
        throw ConfigError("load_persistence must lie in [0, 1)");
    if (!(idle_probability >= 0.0 && idle_probability <= 1.0))
        throw ConfigError("idle_probability must lie in [0, 1]");
    if (latency_inflation < 1.0 || response_inflation < 1.0)
        throw ConfigError("attack inflation multipliers must be >= 1");
    for (double sd : {users_stddev, ratio_stddev, bytes_stddev, latency_stddev, response_stddev})
        if (sd < 0.0)
            throw ConfigError("standard deviations must be non-negative");

    for (std::size_t i = 0; i < attack_schedule.size(); ++i) {
        const auto& a = attack_schedule[i];
        if (a.start < 0 || a.end > duration_steps || a.start >= a.end)
            throw ConfigError("attack interval [" + std::to_string(a.start) + ", " + std::to_string(a.end) +
                              ") does not lie within [0, " + std::to_string(duration_steps) + ")");
        for (std::size_t j = 0; j < i; ++j) {
            const auto& b = attack_schedule[j];
            if (a.type == b.type && a.start < b.end && b.start < a.end)
                throw ConfigError("overlapping " + to_string(a.type) + " attack intervals");
        }
    }
}

std::vector<AttackInterval> default_attack_schedule(std::int64_t duration_steps) {
    auto at = [duration_steps](double fraction) {
        return static_cast<std::int64_t>(std::floor(fraction * static_cast<double>(duration_steps)));
    };
    return {
        {at(0.20), at(0.30), AttackType::syn},
        {at(0.45), at(0.55), AttackType::udp},
        {at(0.50), at(0.60), AttackType::syn},
        {at(0.72), at(0.82), AttackType::icmp},
    };
}

std::vector<FeatureRecord> simulate(const SimulationConfig& config) {
    config.validate();

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const double innovation = std::sqrt(1.0 - config.load_persistence * config.load_persistence);
    double load_deviation = 0.0;

    std::vector<FeatureRecord> records;
    records.reserve(static_cast<std::size_t>(config.duration_steps));

    for (std::int64_t t = 0; t < config.duration_steps; ++t) {
        FeatureRecord r;
        r.t = t;
        for (const auto& interval : config.attack_schedule) {
            if (!interval.contains(t))
                continue;
            switch (interval.type) {
            case AttackType::syn:
                r.dos.syn = true;
                break;
            case AttackType::udp:
                r.dos.udp = true;
                break;
            case AttackType::icmp:
                r.dos.icmp = true;
                break;
            }
        }

        load_deviation = config.load_persistence * load_deviation + innovation * config.users_stddev * normal(rng);
        const bool idle = uniform(rng) < config.idle_probability;
        const double ratio_draw = std::clamp(config.mean_ratio + config.ratio_stddev * normal(rng), kMinRatio, kMaxRatio);

        if (!idle) {
            r.unique_users = std::round(std::clamp(config.mean_users + load_deviation, 1.0, kMaxUsers));
            r.http_requests = std::min(kMaxRequests, std::round(r.unique_users * ratio_draw));
        }
        r.req_user_ratio = request_user_ratio(r.http_requests, r.unique_users);
        r.avg_bytes_sent = std::clamp(config.mean_bytes + config.bytes_stddev * normal(rng), kMinBytes, kMaxBytes);

        double latency = config.latency_baseline + config.latency_per_request * r.http_requests +
                         config.latency_stddev * normal(rng);
        double response = config.response_baseline + config.response_per_request * r.http_requests +
                          config.response_stddev * normal(rng);
        latency = std::clamp(latency, kMinLatency, kMaxLatency);
        response = std::clamp(response, 0.0, kMaxResponse);
        if (r.dos.any()) {
            latency = std::min(latency * config.latency_inflation, kMaxLatency);
            response = std::min(response * config.response_inflation, kMaxResponse);
        }
        r.avg_latency = latency;
        r.avg_response_time = response;
        records.push_back(r);
    }
    return records;
}

std::vector<FeatureRecord> read_records(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("missing header", 1);
    const auto header = detail::split_csv(line);
    // The time column is optional; without it t is the data row index.
    bool has_time = !header.empty() && header.front() == "t";
    const std::size_t expected_fields = has_time ? 10 : 9;
    if (header.size() != expected_fields)
        throw ParseError("unexpected header '" + line + "'", 1);

    std::vector<FeatureRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty())
            continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() != expected_fields)
            throw ParseError("expected " + std::to_string(expected_fields) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);

        FeatureRecord r;
        std::size_t k = 0;
        if (has_time) {
            auto t = detail::parse_int(fields[k++]);
            if (!t)
                throw ParseError("invalid time step '" + std::string(fields[0]) + "'", line_no);
            r.t = *t;
        } else {
            r.t = static_cast<std::int64_t>(records.size());
        }
        double* numeric[] = {&r.http_requests, &r.unique_users, &r.req_user_ratio,
                             &r.avg_bytes_sent, &r.avg_latency, &r.avg_response_time};
        for (double* target : numeric) {
            auto v = detail::parse_double(fields[k]);
            if (!v)
                throw ParseError("invalid number '" + std::string(fields[k]) + "'", line_no);
            *target = *v;
            ++k;
        }
        r.dos.syn = parse_flag(fields[k++], line_no, "syn");
        r.dos.udp = parse_flag(fields[k++], line_no, "udp");
        r.dos.icmp = parse_flag(fields[k++], line_no, "icmp");

        try {
            validate_record(r, 1e-6);
        } catch (const ValidationError& e) {
            throw ValidationError("row " + std::to_string(line_no) + ": " + e.what());
        }
        r.req_user_ratio = request_user_ratio(r.http_requests, r.unique_users);
        records.push_back(r);
    }
    return records;
}

std::vector<FeatureRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open records file " + path.string());
    return read_records(in);
}

void write_records(std::ostream& out, const std::vector<FeatureRecord>& records) {
    out << kHeader << '\n';
    for (const auto& r : records) {
        out << r.t << ',' << detail::format_double(r.http_requests) << ',' << detail::format_double(r.unique_users)
            << ',' << detail::format_double(r.req_user_ratio) << ',' << detail::format_double(r.avg_bytes_sent) << ','
            << detail::format_double(r.avg_latency) << ',' << detail::format_double(r.avg_response_time) << ','
            << int(r.dos.syn) << ',' << int(r.dos.udp) << ',' << int(r.dos.icmp) << '\n';
    }
}

void save_records(const std::filesystem::path& path, const std::vector<FeatureRecord>& records) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write records file " + path.string());
    write_records(out, records);
}

} // namespace riskmdp
