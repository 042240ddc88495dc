#pragma once

#include "riskmdp/mdpbuild.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace riskmdp {

struct PredictionParams {
    std::size_t horizon = 5;
    double probability_floor = 1e-4; // successors need edge probability above this
    std::size_t branching_cap = 16;

    void validate() const;
};

enum class NodeKind {
    internal, // expanded non-risky state
    risky,    // absorbing leaf
    horizon,  // non-risky leaf at the horizon
    pruned,   // non-risky state whose successors were all dropped
};

std::string to_string(NodeKind kind);

inline constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

struct PredictionNode {
    std::size_t state = 0;
    std::size_t depth = 0;
    double probability = 0.0; // product of edge probabilities from the root
    std::size_t parent = kNoParent;
    NodeKind kind = NodeKind::internal;
    int action = -1;          // action taken at expanded nodes
    double pruned_mass = 0.0; // path mass of successors dropped below this node
    std::vector<std::size_t> children;
};

/// Policy-driven forward expansion from a safe abstract state. Risky states
/// are absorbing: they end their branch as leaves.
struct PredictionTree {
    std::size_t root = 0;
    PredictionParams params;
    std::vector<PredictionNode> nodes; // breadth-first; nodes[0] is the root
};

struct MassBalance {
    double risky = 0.0;
    double horizon = 0.0;
    double pruned = 0.0;

    double total() const noexcept { return risky + horizon + pruned; }
};

PredictionTree predict(const MdpModel& mdp, const std::vector<int>& actions,
                       const std::vector<std::uint8_t>& risky_states, std::size_t root,
                       const PredictionParams& params = {});

struct RiskForecast {
    std::size_t depth = 0;
    std::size_t state = 0;
    double probability = 0.0;
};

/// Risky-leaf mass aggregated per (depth, state), ordered by depth, then by
/// descending probability.
std::vector<RiskForecast> risk_report(const PredictionTree& tree);

MassBalance mass_balance(const PredictionTree& tree);

/// Indented plain-text rendering, one node per line.
std::string render_tree(const PredictionTree& tree);

} // namespace riskmdp
