#include "riskmdp/policyeval.hpp"

#include "riskmdp/errors.hpp"

namespace riskmdp {

double AccuracyCounts::accuracy() const noexcept {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(favorable()) / static_cast<double>(n);
}

std::vector<int> lift_policy(const std::vector<int>& abstract_actions, const ClusterModel& model) {
    if (abstract_actions.size() != model.k)
        throw ConfigError("policy has " + std::to_string(abstract_actions.size()) + " actions but the abstraction " +
                          std::to_string(model.k) + " states");
    std::vector<int> lifted;
    lifted.reserve(model.assignment.size());
    for (auto a : model.assignment)
        lifted.push_back(abstract_actions[a]);
    return lifted;
}

AccuracyCounts accuracy(const std::vector<int>& actions, const std::vector<std::uint8_t>& risky) {
    if (actions.size() != risky.size())
        throw ConfigError("action vector and risk labels differ in length");
    AccuracyCounts c;
    for (std::size_t s = 0; s < actions.size(); ++s) {
        const bool remain = actions[s] == kRemain;
        if (risky[s])
            ++(remain ? c.risky_remain : c.risky_jump);
        else
            ++(remain ? c.safe_remain : c.safe_jump);
    }
    return c;
}

std::vector<std::uint8_t> abstract_risk_labels(const ClusterModel& model, const RiskLabeling& labeling,
                                               const RiskParams& params) {
    const auto clusters = summarize_clusters(model, labeling);
    std::vector<std::uint8_t> labels;
    labels.reserve(clusters.size());
    for (const auto& c : clusters)
        labels.push_back(c.members > 0 && is_risky(c.mean_risk, params) ? 1 : 0);
    return labels;
}

AccuracyReport evaluate_policy_accuracy(const Policy& policy, const ClusterModel& model, const RiskLabeling& labeling,
                                        const RiskParams& params) {
    AccuracyReport report;
    report.abstract_counts = accuracy(policy.actions, abstract_risk_labels(model, labeling, params));
    report.original_counts = accuracy(lift_policy(policy.actions, model), labeling.risky);
    return report;
}

} // namespace riskmdp
