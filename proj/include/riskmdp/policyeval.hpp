#pragma once

#include "riskmdp/abstraction.hpp"
#include "riskmdp/mdpbuild.hpp"
#include "riskmdp/solvers.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace riskmdp {

/// Confusion counts of actions against risk labels on one state space.
struct AccuracyCounts {
    std::size_t risky_remain = 0; // favorable
    std::size_t risky_jump = 0;
    std::size_t safe_remain = 0;
    std::size_t safe_jump = 0;    // favorable

    std::size_t total() const noexcept { return risky_remain + risky_jump + safe_remain + safe_jump; }
    std::size_t favorable() const noexcept { return risky_remain + safe_jump; }
    double accuracy() const noexcept;

    bool operator==(const AccuracyCounts&) const = default;
};

struct AccuracyReport {
    AccuracyCounts abstract_counts;
    AccuracyCounts original_counts;

    double abstract_accuracy() const noexcept { return abstract_counts.accuracy(); }
    double original_accuracy() const noexcept { return original_counts.accuracy(); }
};

/// Give every original state the action of its abstract state.
std::vector<int> lift_policy(const std::vector<int>& abstract_actions, const ClusterModel& model);

AccuracyCounts accuracy(const std::vector<int>& actions, const std::vector<std::uint8_t>& risky);

/// An abstract state is risky when the mean risk of its members exceeds R_th.
std::vector<std::uint8_t> abstract_risk_labels(const ClusterModel& model, const RiskLabeling& labeling,
                                               const RiskParams& params);

AccuracyReport evaluate_policy_accuracy(const Policy& policy, const ClusterModel& model, const RiskLabeling& labeling,
                                        const RiskParams& params);

} // namespace riskmdp
