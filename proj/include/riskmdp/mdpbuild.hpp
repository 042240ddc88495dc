#pragma once

#include "riskmdp/abstraction.hpp"
#include "riskmdp/discretizer.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace riskmdp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr int kRemain = 0;
inline constexpr int kJump = 1;
inline constexpr int kActionCount = 2;

/// How the DoS flag F_7 is derived from the DoS code.
enum class DosFlagRule {
    attack_present, // F_7 = 1 for any attack combination
    first_half,     // F_7 = 1 for codes >= 4, like the other features
};

struct RiskParams {
    std::array<double, kFeatureCount> weights{1000, 1000, 1000, 1000, 2000, 2000, 3000};
    double alpha = 0.5;
    /// w_a; the mean of `weights` when unset.
    std::optional<double> action_weight;
    DosFlagRule dos_rule = DosFlagRule::attack_present;

    double total_weight() const noexcept;
    double action_weight_value() const noexcept;
    void validate() const;
};

using FeatureFlags = std::array<int, kFeatureCount>;

FeatureFlags feature_flags(const DiscreteState& state, const BinningScheme& scheme, const RiskParams& params);
double risk_metric(const DiscreteState& state, const BinningScheme& scheme, const RiskParams& params);
double risk_threshold(const RiskParams& params);
bool is_risky(double risk, const RiskParams& params) noexcept;

/// R_a: +1 for remaining in a risky state or jumping from a safe one, else -1.
int action_reward(double risk, int action, const RiskParams& params);
double state_reward(double risk, int action, const RiskParams& params);
double state_reward(const DiscreteState& state, int action, const BinningScheme& scheme, const RiskParams& params);

/// Risk metric and label of every original state.
struct RiskLabeling {
    std::vector<double> risk;
    std::vector<std::uint8_t> risky;

    std::size_t size() const noexcept { return risk.size(); }
};

RiskLabeling label_states(const BinningScheme& scheme, const RiskParams& params);

/// Member statistics of each abstract state.
struct ClusterRisk {
    std::size_t members = 0;
    std::size_t risky_members = 0;
    double mean_risk = 0.0; // 0 for empty clusters
};

std::vector<ClusterRisk> summarize_clusters(const ClusterModel& model, const RiskLabeling& labeling);

/// Mean of state_reward over the members of an abstract state; 0 when empty.
double abstract_reward(const ClusterModel& model, std::size_t abstract_id, int action, const RiskParams& params,
                       const RiskLabeling& labeling);
double abstract_reward(const ClusterRisk& cluster, int action, const RiskParams& params);

/// Row-normalized transition counts; states without outgoing transitions
/// become pure self-loops.
Matrix empirical_transitions(const std::vector<std::size_t>& trajectory, std::size_t k);

/// Linear map of a risk value into [0.51, 1.0].
double self_transition_prob(double risk, double risk_min, double risk_max);

struct MdpModel {
    std::size_t k = 0;
    double gamma = 0.1;
    Eigen::Matrix<double, Eigen::Dynamic, kActionCount> reward;
    std::array<Matrix, kActionCount> transition;

    /// Throws ModelError unless both matrices are row-stochastic and rewards finite.
    void validate(double tolerance = 1e-9) const;
};

std::vector<std::size_t> abstract_trajectory(const ClusterModel& model, const std::vector<std::size_t>& state_indices);

/// Assemble rewards and both transition matrices over the abstract states.
MdpModel build_mdp(const ClusterModel& model, const std::vector<std::size_t>& trajectory, const RiskLabeling& labeling,
                   const RiskParams& params, double gamma);

} // namespace riskmdp
