#include "riskmdp/predictor.hpp"

#include "riskmdp/errors.hpp"
#include "text.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>

namespace riskmdp {

void PredictionParams::validate() const {
    if (horizon < 1)
        throw ConfigError("prediction horizon must be at least 1");
    if (!(probability_floor >= 0.0 && probability_floor <= 1.0))
        throw ConfigError("probability floor must lie in [0, 1]");
    if (branching_cap < 1)
        throw ConfigError("branching cap must be at least 1");
}

std::string to_string(NodeKind kind) {
    switch (kind) {
    case NodeKind::internal:
        return "internal";
    case NodeKind::risky:
        return "risky";
    case NodeKind::horizon:
        return "horizon";
    case NodeKind::pruned:
        return "pruned";
    }
    return "unknown";
}

PredictionTree predict(const MdpModel& mdp, const std::vector<int>& actions,
                       const std::vector<std::uint8_t>& risky_states, std::size_t root,
                       const PredictionParams& params) {
    params.validate();
    if (actions.size() != mdp.k || risky_states.size() != mdp.k)
        throw ConfigError("policy and risk labels must cover every abstract state");
    if (root >= mdp.k)
        throw ConfigError("root state " + std::to_string(root) + " out of range");
    if (risky_states[root])
        throw ConfigError("prediction must start from a non-risky state; " + std::to_string(root) + " is risky");

    PredictionTree tree;
    tree.root = root;
    tree.params = params;
    tree.nodes.push_back({root, 0, 1.0, kNoParent, NodeKind::internal, -1, 0.0, {}});

    std::deque<std::size_t> frontier{0};
    std::vector<std::pair<double, std::size_t>> successors;
    while (!frontier.empty()) {
        const std::size_t id = frontier.front();
        frontier.pop_front();
        const std::size_t state = tree.nodes[id].state;
        const std::size_t depth = tree.nodes[id].depth;
        const double mass = tree.nodes[id].probability;
        const int action = actions[state];
        const auto& row = mdp.transition[static_cast<std::size_t>(action)].row(static_cast<Eigen::Index>(state));

        successors.clear();
        double kept = 0.0;
        for (Eigen::Index s = 0; s < row.size(); ++s)
            if (row(s) > params.probability_floor)
                successors.emplace_back(row(s), static_cast<std::size_t>(s));
        std::ranges::sort(successors, [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        if (successors.size() > params.branching_cap)
            successors.resize(params.branching_cap);

        tree.nodes[id].action = action;
        for (const auto& [p, next] : successors) {
            kept += p;
            PredictionNode child;
            child.state = next;
            child.depth = depth + 1;
            child.probability = mass * p;
            child.parent = id;
            if (risky_states[next])
                child.kind = NodeKind::risky;
            else if (child.depth >= params.horizon)
                child.kind = NodeKind::horizon;
            const std::size_t child_id = tree.nodes.size();
            tree.nodes[id].children.push_back(child_id);
            tree.nodes.push_back(std::move(child));
            if (tree.nodes[child_id].kind == NodeKind::internal)
                frontier.push_back(child_id);
        }
        tree.nodes[id].pruned_mass = mass * std::max(0.0, 1.0 - kept);
        if (tree.nodes[id].children.empty())
            tree.nodes[id].kind = NodeKind::pruned;
    }
    return tree;
}

std::vector<RiskForecast> risk_report(const PredictionTree& tree) {
    std::map<std::pair<std::size_t, std::size_t>, double> mass;
    for (const auto& node : tree.nodes)
        if (node.kind == NodeKind::risky)
            mass[{node.depth, node.state}] += node.probability;

    std::vector<RiskForecast> report;
    report.reserve(mass.size());
    for (const auto& [key, p] : mass)
        report.push_back({key.first, key.second, p});
    std::ranges::sort(report, [](const RiskForecast& a, const RiskForecast& b) {
        if (a.depth != b.depth)
            return a.depth < b.depth;
        if (a.probability != b.probability)
            return a.probability > b.probability;
        return a.state < b.state;
    });
    return report;
}

MassBalance mass_balance(const PredictionTree& tree) {
    MassBalance b;
    for (const auto& node : tree.nodes) {
        if (node.kind == NodeKind::risky)
            b.risky += node.probability;
        else if (node.kind == NodeKind::horizon)
            b.horizon += node.probability;
        b.pruned += node.pruned_mass;
    }
    return b;
}

std::string render_tree(const PredictionTree& tree) {
    std::ostringstream out;
    out << "# prediction tree from abstract state " << tree.root << ", horizon " << tree.params.horizon
        << "; risky states are treated as absorbing leaves\n";
    if (tree.nodes.empty())
        return out.str();
    // depth-first so children print under their parent
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const auto id = stack.back();
        stack.pop_back();
        const auto& n = tree.nodes[id];
        out << std::string(2 * n.depth, ' ') << "s" << n.state << " p=" << detail::format_double(n.probability);
        if (n.kind == NodeKind::internal || n.kind == NodeKind::pruned)
            out << (n.action == kRemain ? " [remain]" : " [jump]");
        if (n.kind != NodeKind::internal)
            out << " (" << to_string(n.kind) << ")";
        if (n.pruned_mass > 0.0)
            out << " pruned=" << detail::format_double(n.pruned_mass);
        out << '\n';
        for (auto it = n.children.rbegin(); it != n.children.rend(); ++it)
            stack.push_back(*it);
    }
    return out.str();
}

} // namespace riskmdp
