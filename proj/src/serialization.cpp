#include "riskmdp/serialization.hpp"

#include "riskmdp/errors.hpp"
#include "text.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace riskmdp {

namespace {

std::string dos_rule_name(DosFlagRule rule) {
    return rule == DosFlagRule::attack_present ? "attack_present" : "first_half";
}

DosFlagRule dos_rule_from_name(const std::string& name) {
    if (name == "attack_present")
        return DosFlagRule::attack_present;
    if (name == "first_half")
        return DosFlagRule::first_half;
    throw ConfigError("unknown dos_rule '" + name + "'");
}

NodeKind node_kind_from_string(const std::string& name) {
    for (auto kind : {NodeKind::internal, NodeKind::risky, NodeKind::horizon, NodeKind::pruned})
        if (to_string(kind) == name)
            return kind;
    throw DataError("unknown node kind '" + name + "'");
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        rows.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
    return rows;
}

Matrix matrix_from_json(const json& j, std::size_t k) {
    const auto n = static_cast<Eigen::Index>(k);
    if (!j.is_array() || j.size() != k)
        throw DataError("transition matrix must have " + std::to_string(k) + " rows");
    Matrix m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto row = j[static_cast<std::size_t>(r)].get<std::vector<double>>();
        if (row.size() != k)
            throw DataError("transition row " + std::to_string(r) + " has the wrong length");
        for (Eigen::Index c = 0; c < n; ++c)
            m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

template <class T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
        throw DataError("transition sidecar is truncated");
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

} // namespace

// --- featurestream ---------------------------------------------------------

void to_json(json& j, const AttackInterval& v) {
    j = json{{"start", v.start}, {"end", v.end}, {"type", to_string(v.type)}};
}

void from_json(const json& j, AttackInterval& v) {
    v.start = j.at("start").get<std::int64_t>();
    v.end = j.at("end").get<std::int64_t>();
    v.type = attack_type_from_string(j.at("type").get<std::string>());
}

void to_json(json& j, const SimulationConfig& v) {
    j = json{{"duration_steps", v.duration_steps},
             {"seed", v.seed},
             {"attack_schedule", v.attack_schedule},
             {"mean_users", v.mean_users},
             {"users_stddev", v.users_stddev},
             {"load_persistence", v.load_persistence},
             {"mean_ratio", v.mean_ratio},
             {"ratio_stddev", v.ratio_stddev},
             {"mean_bytes", v.mean_bytes},
             {"bytes_stddev", v.bytes_stddev},
             {"latency_baseline", v.latency_baseline},
             {"latency_stddev", v.latency_stddev},
             {"latency_per_request", v.latency_per_request},
             {"response_baseline", v.response_baseline},
             {"response_stddev", v.response_stddev},
             {"response_per_request", v.response_per_request},
             {"idle_probability", v.idle_probability},
             {"latency_inflation", v.latency_inflation},
             {"response_inflation", v.response_inflation}};
}

void from_json(const json& j, SimulationConfig& v) {
    const SimulationConfig d;
    v.duration_steps = j.value("duration_steps", d.duration_steps);
    v.seed = j.value("seed", d.seed);
    v.attack_schedule = j.value("attack_schedule", d.attack_schedule);
    v.mean_users = j.value("mean_users", d.mean_users);
    v.users_stddev = j.value("users_stddev", d.users_stddev);
    v.load_persistence = j.value("load_persistence", d.load_persistence);
    v.mean_ratio = j.value("mean_ratio", d.mean_ratio);
    v.ratio_stddev = j.value("ratio_stddev", d.ratio_stddev);
    v.mean_bytes = j.value("mean_bytes", d.mean_bytes);
    v.bytes_stddev = j.value("bytes_stddev", d.bytes_stddev);
    v.latency_baseline = j.value("latency_baseline", d.latency_baseline);
    v.latency_stddev = j.value("latency_stddev", d.latency_stddev);
    v.latency_per_request = j.value("latency_per_request", d.latency_per_request);
    v.response_baseline = j.value("response_baseline", d.response_baseline);
    v.response_stddev = j.value("response_stddev", d.response_stddev);
    v.response_per_request = j.value("response_per_request", d.response_per_request);
    v.idle_probability = j.value("idle_probability", d.idle_probability);
    v.latency_inflation = j.value("latency_inflation", d.latency_inflation);
    v.response_inflation = j.value("response_inflation", d.response_inflation);
}

// --- discretizer -----------------------------------------------------------

void to_json(json& j, const FeatureBinning& v) {
    j = json{{"name", v.name}, {"lower", v.lower}, {"upper", v.upper}, {"width", v.width}, {"count", v.count}};
    if (v.categorical)
        j["categorical"] = true;
}

void from_json(const json& j, FeatureBinning& v) {
    v.name = j.at("name").get<std::string>();
    v.lower = j.at("lower").get<double>();
    v.upper = j.at("upper").get<double>();
    v.width = j.at("width").get<double>();
    v.count = j.at("count").get<int>();
    v.categorical = j.value("categorical", false);
}

void to_json(json& j, const BinningScheme& v) {
    j = json{{"features", v.features}};
}

void from_json(const json& j, BinningScheme& v) {
    v.features = j.at("features").get<std::vector<FeatureBinning>>();
}

// --- abstraction -----------------------------------------------------------

void to_json(json& j, const ClusterModel& v) {
    j = json{{"algorithm", to_string(v.algorithm)}, {"k", v.k}, {"dim", v.dim}, {"centroids", v.centroids}};
    if (v.algorithm == ClusterAlgorithm::kmm)
        j["inverse_covariance"] = v.inverse_covariance;
    if (v.algorithm == ClusterAlgorithm::gmm) {
        j["weights"] = v.weights;
        j["variances"] = v.variances;
    }
    j["assignment"] = v.assignment;
}

void from_json(const json& j, ClusterModel& v) {
    v.algorithm = cluster_algorithm_from_string(j.at("algorithm").get<std::string>());
    v.k = j.at("k").get<std::size_t>();
    v.dim = j.at("dim").get<std::size_t>();
    v.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
    v.inverse_covariance = j.value("inverse_covariance", std::vector<std::vector<double>>{});
    v.weights = j.value("weights", std::vector<double>{});
    v.variances = j.value("variances", std::vector<std::vector<double>>{});
    v.assignment = j.at("assignment").get<std::vector<std::uint32_t>>();
    if (v.centroids.size() != v.k)
        throw DataError("cluster model lists " + std::to_string(v.centroids.size()) + " centroids for k=" +
                        std::to_string(v.k));
    for (auto a : v.assignment)
        if (a >= v.k)
            throw DataError("cluster assignment " + std::to_string(a) + " out of range");
}

// --- mdpbuild --------------------------------------------------------------

void to_json(json& j, const RiskParams& v) {
    j = json{{"weights", v.weights}, {"alpha", v.alpha}, {"dos_rule", dos_rule_name(v.dos_rule)}};
    if (v.action_weight)
        j["action_weight"] = *v.action_weight;
    else
        j["action_weight"] = "mean";
}

void from_json(const json& j, RiskParams& v) {
    const RiskParams d;
    v.weights = j.value("weights", d.weights);
    v.alpha = j.value("alpha", d.alpha);
    v.dos_rule = dos_rule_from_name(j.value("dos_rule", dos_rule_name(d.dos_rule)));
    v.action_weight.reset();
    if (j.contains("action_weight")) {
        const auto& w = j.at("action_weight");
        if (w.is_number())
            v.action_weight = w.get<double>();
        else if (w.is_string() && w.get<std::string>() == "literal")
            v.action_weight = 1500.0;
        else if (!(w.is_string() && w.get<std::string>() == "mean"))
            throw ConfigError("action_weight must be a number, \"mean\" or \"literal\"");
    }
}

json mdp_to_json(const MdpModel& mdp) {
    json reward = json::array();
    for (Eigen::Index s = 0; s < mdp.reward.rows(); ++s)
        reward.push_back({mdp.reward(s, 0), mdp.reward(s, 1)});
    return json{{"k", mdp.k},
                {"gamma", mdp.gamma},
                {"reward", reward},
                {"transitions", {matrix_to_json(mdp.transition[0]), matrix_to_json(mdp.transition[1])}}};
}

MdpModel mdp_from_json(const json& j, const std::filesystem::path& base_dir) {
    MdpModel mdp;
    mdp.k = j.at("k").get<std::size_t>();
    mdp.gamma = j.at("gamma").get<double>();
    const auto& reward = j.at("reward");
    if (!reward.is_array() || reward.size() != mdp.k)
        throw DataError("reward matrix must have k rows");
    mdp.reward.resize(static_cast<Eigen::Index>(mdp.k), kActionCount);
    for (std::size_t s = 0; s < mdp.k; ++s) {
        const auto row = reward[s].get<std::vector<double>>();
        if (row.size() != kActionCount)
            throw DataError("reward row " + std::to_string(s) + " must have two entries");
        mdp.reward(static_cast<Eigen::Index>(s), 0) = row[0];
        mdp.reward(static_cast<Eigen::Index>(s), 1) = row[1];
    }
    if (j.contains("transitions")) {
        const auto& t = j.at("transitions");
        if (!t.is_array() || t.size() != kActionCount)
            throw DataError("expected two transition matrices");
        mdp.transition[0] = matrix_from_json(t[0], mdp.k);
        mdp.transition[1] = matrix_from_json(t[1], mdp.k);
    } else if (j.contains("transitions_sidecar")) {
        const auto path = base_dir / j.at("transitions_sidecar").get<std::string>();
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw DataError("cannot open transition sidecar " + path.string());
        read_transition_sidecar(in, mdp);
    } else {
        throw DataError("MDP file has neither transitions nor a sidecar reference");
    }
    mdp.validate();
    return mdp;
}

void write_transition_sidecar(std::ostream& out, const MdpModel& mdp) {
    for (const auto& m : mdp.transition) {
        write_le(out, static_cast<std::uint32_t>(m.rows()));
        write_le(out, static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                write_le(out, m(r, c));
    }
}

void read_transition_sidecar(std::istream& in, MdpModel& mdp) {
    for (auto& m : mdp.transition) {
        const auto rows = read_le<std::uint32_t>(in);
        const auto cols = read_le<std::uint32_t>(in);
        if (rows != mdp.k || cols != mdp.k)
            throw DataError("transition sidecar dimensions do not match k=" + std::to_string(mdp.k));
        m.resize(rows, cols);
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                m(r, c) = read_le<double>(in);
    }
}

void save_mdp(const std::filesystem::path& path, const MdpModel& mdp, bool sidecar) {
    if (!sidecar) {
        save_json(path, mdp_to_json(mdp));
        return;
    }
    auto j = mdp_to_json(mdp);
    j.erase("transitions");
    auto bin = path;
    bin += ".bin";
    j["transitions_sidecar"] = bin.filename().string();
    std::ofstream out(bin, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + bin.string());
    write_transition_sidecar(out, mdp);
    save_json(path, j);
}

MdpModel load_mdp(const std::filesystem::path& path) {
    try {
        return mdp_from_json(load_json(path), path.parent_path());
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

// --- solvers / policyeval --------------------------------------------------

void to_json(json& j, const Policy& v) {
    j = json{{"solver", to_string(v.solver)},
             {"gamma", v.gamma},
             {"actions", v.actions},
             {"values", v.values},
             {"iterations", v.iterations},
             {"seconds", v.seconds},
             {"converged", v.converged},
             {"residual", v.residual}};
    if (v.solver == SolverKind::relative_value_iteration)
        j["gain"] = v.gain;
}

void from_json(const json& j, Policy& v) {
    v.solver = solver_from_string(j.at("solver").get<std::string>());
    v.gamma = j.at("gamma").get<double>();
    v.actions = j.at("actions").get<std::vector<int>>();
    v.values = j.at("values").get<std::vector<double>>();
    v.iterations = j.at("iterations").get<std::size_t>();
    v.seconds = j.at("seconds").get<double>();
    v.converged = j.value("converged", true);
    v.residual = j.value("residual", 0.0);
    v.gain = j.value("gain", 0.0);
    if (v.actions.size() != v.values.size())
        throw DataError("policy actions and values differ in length");
    for (int a : v.actions)
        if (a != kRemain && a != kJump)
            throw DataError("policy action must be 0 or 1");
}

void to_json(json& j, const AccuracyCounts& v) {
    j = json{{"accuracy", v.accuracy()},
             {"favorable", v.favorable()},
             {"total", v.total()},
             {"risky_remain", v.risky_remain},
             {"risky_jump", v.risky_jump},
             {"safe_remain", v.safe_remain},
             {"safe_jump", v.safe_jump}};
}

void from_json(const json& j, AccuracyCounts& v) {
    v.risky_remain = j.at("risky_remain").get<std::size_t>();
    v.risky_jump = j.at("risky_jump").get<std::size_t>();
    v.safe_remain = j.at("safe_remain").get<std::size_t>();
    v.safe_jump = j.at("safe_jump").get<std::size_t>();
}

void to_json(json& j, const AccuracyReport& v) {
    j = json{{"abstract", v.abstract_counts}, {"original", v.original_counts}};
}

void from_json(const json& j, AccuracyReport& v) {
    v.abstract_counts = j.at("abstract").get<AccuracyCounts>();
    v.original_counts = j.at("original").get<AccuracyCounts>();
}

std::string accuracy_csv_header() {
    return "abstract_acc,original_acc,abstract_favorable,abstract_total,original_favorable,original_total";
}

std::string accuracy_csv_row(const AccuracyReport& r) {
    std::ostringstream out;
    out << detail::format_double(r.abstract_accuracy()) << ',' << detail::format_double(r.original_accuracy()) << ','
        << r.abstract_counts.favorable() << ',' << r.abstract_counts.total() << ',' << r.original_counts.favorable()
        << ',' << r.original_counts.total();
    return out.str();
}

// --- predictor -------------------------------------------------------------

void to_json(json& j, const PredictionParams& v) {
    j = json{{"horizon", v.horizon}, {"probability_floor", v.probability_floor}, {"branching_cap", v.branching_cap}};
}

void from_json(const json& j, PredictionParams& v) {
    const PredictionParams d;
    v.horizon = j.value("horizon", d.horizon);
    v.probability_floor = j.value("probability_floor", d.probability_floor);
    v.branching_cap = j.value("branching_cap", d.branching_cap);
}

void to_json(json& j, const PredictionTree& v) {
    json nodes = json::array();
    for (std::size_t i = 0; i < v.nodes.size(); ++i) {
        const auto& n = v.nodes[i];
        json node{{"id", i},
                  {"state", n.state},
                  {"depth", n.depth},
                  {"probability", n.probability},
                  {"parent", n.parent == kNoParent ? json(nullptr) : json(n.parent)},
                  {"kind", to_string(n.kind)},
                  {"pruned_mass", n.pruned_mass}};
        if (n.action >= 0)
            node["action"] = n.action;
        nodes.push_back(std::move(node));
    }
    j = json{{"root", v.root},
             {"params", v.params},
             {"absorbing_risky_states", true},
             {"nodes", std::move(nodes)}};
}

void from_json(const json& j, PredictionTree& v) {
    v.root = j.at("root").get<std::size_t>();
    v.params = j.at("params").get<PredictionParams>();
    v.nodes.clear();
    for (const auto& node : j.at("nodes")) {
        PredictionNode n;
        n.state = node.at("state").get<std::size_t>();
        n.depth = node.at("depth").get<std::size_t>();
        n.probability = node.at("probability").get<double>();
        n.parent = node.at("parent").is_null() ? kNoParent : node.at("parent").get<std::size_t>();
        n.kind = node_kind_from_string(node.at("kind").get<std::string>());
        n.action = node.value("action", -1);
        n.pruned_mass = node.value("pruned_mass", 0.0);
        v.nodes.push_back(std::move(n));
    }
    for (std::size_t i = 0; i < v.nodes.size(); ++i) {
        const auto parent = v.nodes[i].parent;
        if (parent == kNoParent)
            continue;
        if (parent >= i)
            throw DataError("prediction tree node " + std::to_string(i) + " precedes its parent");
        v.nodes[parent].children.push_back(i);
    }
}

void save_risk_report(const std::filesystem::path& path, const std::vector<RiskForecast>& report) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << "depth,state,probability\n";
    for (const auto& r : report)
        out << r.depth << ',' << r.state << ',' << detail::format_double(r.probability) << '\n';
}

std::vector<RiskForecast> load_risk_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<RiskForecast> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty())
            continue;
        const auto f = detail::split_csv(line);
        auto depth = f.size() == 3 ? detail::parse_int(f[0]) : std::nullopt;
        auto state = f.size() == 3 ? detail::parse_int(f[1]) : std::nullopt;
        auto p = f.size() == 3 ? detail::parse_double(f[2]) : std::nullopt;
        if (!depth || !state || !p)
            throw ParseError("malformed risk report row", line_no);
        out.push_back({static_cast<std::size_t>(*depth), static_cast<std::size_t>(*state), *p});
    }
    return out;
}

// --- files -----------------------------------------------------------------

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_json(const std::filesystem::path& path, const json& value) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << value.dump(1) << '\n';
}

} // namespace riskmdp
