#include "riskmdp/mdpbuild.hpp"

#include "riskmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace riskmdp {

double RiskParams::total_weight() const noexcept {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

double RiskParams::action_weight_value() const noexcept {
    return action_weight.value_or(total_weight() / static_cast<double>(weights.size()));
}

void RiskParams::validate() const {
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w))
            throw ConfigError("risk weights must be positive");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("alpha must lie in (0, 1)");
    if (action_weight && !(*action_weight > 0.0 && std::isfinite(*action_weight)))
        throw ConfigError("action weight must be positive");
}

FeatureFlags feature_flags(const DiscreteState& state, const BinningScheme& scheme, const RiskParams& params) {
    FeatureFlags flags{};
    for (std::size_t i = 0; i < kDosFeature; ++i) {
        const int safe_codes = (scheme.features[i].count + 1) / 2; // ceil(n/2)
        flags[i] = state.codes[i] < safe_codes ? 0 : 1;
    }
    const int dos = state.codes[kDosFeature];
    if (params.dos_rule == DosFlagRule::attack_present)
        flags[kDosFeature] = dos == 0 ? 0 : 1;
    else
        flags[kDosFeature] = dos < (scheme.features[kDosFeature].count + 1) / 2 ? 0 : 1;
    return flags;
}

double risk_metric(const DiscreteState& state, const BinningScheme& scheme, const RiskParams& params) {
    const auto flags = feature_flags(state, scheme, params);
    double rm = 0.0;
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        rm += params.weights[i] * flags[i];
    return rm;
}

double risk_threshold(const RiskParams& params) {
    return params.alpha * params.total_weight();
}

bool is_risky(double risk, const RiskParams& params) noexcept {
    return risk > risk_threshold(params);
}

int action_reward(double risk, int action, const RiskParams& params) {
    if (action != kRemain && action != kJump)
        throw ConfigError("action must be 0 or 1");
    const bool risky = is_risky(risk, params);
    return (risky == (action == kRemain)) ? +1 : -1;
}

double state_reward(double risk, int action, const RiskParams& params) {
    return risk + params.action_weight_value() * action_reward(risk, action, params);
}

double state_reward(const DiscreteState& state, int action, const BinningScheme& scheme, const RiskParams& params) {
    return state_reward(risk_metric(state, scheme, params), action, params);
}

RiskLabeling label_states(const BinningScheme& scheme, const RiskParams& params) {
    scheme.validate_record_layout();
    params.validate();
    const auto states = enumerate_states(scheme);
    RiskLabeling labeling;
    labeling.risk.reserve(states.size());
    labeling.risky.reserve(states.size());
    for (const auto& s : states) {
        const double rm = risk_metric(s, scheme, params);
        labeling.risk.push_back(rm);
        labeling.risky.push_back(is_risky(rm, params) ? 1 : 0);
    }
    return labeling;
}

std::vector<ClusterRisk> summarize_clusters(const ClusterModel& model, const RiskLabeling& labeling) {
    if (labeling.size() != model.assignment.size())
        throw ConfigError("risk labeling covers " + std::to_string(labeling.size()) + " states but the cluster model " +
                          std::to_string(model.assignment.size()));
    std::vector<ClusterRisk> clusters(model.k);
    std::vector<double> risk_sum(model.k, 0.0);
    for (std::size_t s = 0; s < model.assignment.size(); ++s) {
        auto& c = clusters[model.assignment[s]];
        ++c.members;
        c.risky_members += labeling.risky[s];
        risk_sum[model.assignment[s]] += labeling.risk[s];
    }
    for (std::size_t c = 0; c < model.k; ++c)
        if (clusters[c].members > 0)
            clusters[c].mean_risk = risk_sum[c] / static_cast<double>(clusters[c].members);
    return clusters;
}

double abstract_reward(const ClusterRisk& cluster, int action, const RiskParams& params) {
    if (action != kRemain && action != kJump)
        throw ConfigError("action must be 0 or 1");
    if (cluster.members == 0)
        return 0.0;
    // Mean of RM_s + w_a R_a over members, with the R_a part taken from exact
    // integer counts so balanced clusters give identical rewards for both actions.
    const auto risky = static_cast<long long>(cluster.risky_members);
    const auto safe = static_cast<long long>(cluster.members) - risky;
    const long long favorable_margin = action == kRemain ? risky - safe : safe - risky;
    return cluster.mean_risk +
           params.action_weight_value() * static_cast<double>(favorable_margin) / static_cast<double>(cluster.members);
}

double abstract_reward(const ClusterModel& model, std::size_t abstract_id, int action, const RiskParams& params,
                       const RiskLabeling& labeling) {
    if (abstract_id >= model.k)
        throw std::out_of_range("abstract state " + std::to_string(abstract_id) + " out of range");
    if (labeling.size() != model.assignment.size())
        throw ConfigError("risk labeling does not match the cluster model");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < model.assignment.size(); ++s) {
        if (model.assignment[s] != abstract_id)
            continue;
        sum += state_reward(labeling.risk[s], action, params);
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

Matrix empirical_transitions(const std::vector<std::size_t>& trajectory, std::size_t k) {
    if (k == 0)
        throw ConfigError("transition matrix needs at least one state");
    if (trajectory.size() < 2)
        throw ConfigError("trajectory needs at least two steps to estimate transitions");
    for (auto s : trajectory)
        if (s >= k)
            throw ConfigError("trajectory state " + std::to_string(s) + " outside [0, " + std::to_string(k) + ")");

    Matrix counts = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t t = 0; t + 1 < trajectory.size(); ++t)
        counts(static_cast<Eigen::Index>(trajectory[t]), static_cast<Eigen::Index>(trajectory[t + 1])) += 1.0;
    for (Eigen::Index s = 0; s < counts.rows(); ++s) {
        const double outgoing = counts.row(s).sum();
        if (outgoing > 0.0)
            counts.row(s) /= outgoing;
        else
            counts(s, s) = 1.0;
    }
    return counts;
}

double self_transition_prob(double risk, double risk_min, double risk_max) {
    if (risk_max < risk_min)
        throw ConfigError("risk range is inverted");
    if (risk_max == risk_min)
        return 0.51;
    const double scaled = (risk - risk_min) / (risk_max - risk_min);
    return std::clamp(scaled * 0.49 + 0.51, 0.51, 1.0);
}

void MdpModel::validate(double tolerance) const {
    const auto n = static_cast<Eigen::Index>(k);
    if (reward.rows() != n)
        throw ModelError("reward matrix has " + std::to_string(reward.rows()) + " rows, expected " + std::to_string(k));
    if (!reward.allFinite())
        throw ModelError("reward matrix has non-finite entries");
    for (int a = 0; a < kActionCount; ++a) {
        const auto& p = transition[static_cast<std::size_t>(a)];
        if (p.rows() != n || p.cols() != n)
            throw ModelError("transition matrix for action " + std::to_string(a) + " is not " + std::to_string(k) +
                             "x" + std::to_string(k));
        if (!p.allFinite() || p.minCoeff() < 0.0 || p.maxCoeff() > 1.0)
            throw ModelError("transition matrix for action " + std::to_string(a) + " has entries outside [0, 1]");
        for (Eigen::Index s = 0; s < n; ++s)
            if (std::abs(p.row(s).sum() - 1.0) > tolerance)
                throw ModelError("transition row " + std::to_string(s) + " for action " + std::to_string(a) +
                                 " does not sum to 1");
    }
}

std::vector<std::size_t> abstract_trajectory(const ClusterModel& model, const std::vector<std::size_t>& state_indices) {
    std::vector<std::size_t> out;
    out.reserve(state_indices.size());
    for (auto s : state_indices)
        out.push_back(model.map_state(s));
    return out;
}

MdpModel build_mdp(const ClusterModel& model, const std::vector<std::size_t>& trajectory, const RiskLabeling& labeling,
                   const RiskParams& params, double gamma) {
    params.validate();
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw ConfigError("discount factor must lie in (0, 1]");
    if (model.k == 0 || model.assignment.empty())
        throw ConfigError("cluster model is empty");
    const auto clusters = summarize_clusters(model, labeling);
    const auto k = model.k;
    const auto n = static_cast<Eigen::Index>(k);

    MdpModel mdp;
    mdp.k = k;
    mdp.gamma = gamma;
    mdp.reward.resize(n, kActionCount);
    for (std::size_t c = 0; c < k; ++c)
        for (int a = 0; a < kActionCount; ++a)
            mdp.reward(static_cast<Eigen::Index>(c), a) = abstract_reward(clusters[c], a, params);

    Matrix base = empirical_transitions(trajectory, k);

    double risk_min = std::numeric_limits<double>::infinity();
    double risk_max = -std::numeric_limits<double>::infinity();
    for (const auto& c : clusters) {
        if (c.members == 0)
            continue;
        risk_min = std::min(risk_min, c.mean_risk);
        risk_max = std::max(risk_max, c.mean_risk);
    }

    Matrix remain = Matrix::Zero(n, n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const double self = base(s, s);
        const double off_mass = base.row(s).sum() - self;
        if (off_mass <= 0.0) {
            remain(s, s) = 1.0;
            continue;
        }
        const auto& c = clusters[static_cast<std::size_t>(s)];
        const double ts = self_transition_prob(c.mean_risk, risk_min, risk_max);
        remain.row(s) = base.row(s) * ((1.0 - ts) / off_mass);
        remain(s, s) = ts;
    }

    mdp.transition[kRemain] = std::move(remain);
    mdp.transition[kJump] = std::move(base);
    mdp.validate();
    return mdp;
}

} // namespace riskmdp
