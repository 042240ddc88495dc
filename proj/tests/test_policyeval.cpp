#include "riskmdp/errors.hpp"
#include "riskmdp/policyeval.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace riskmdp;

namespace {

ClusterModel single_cluster(std::size_t n) {
    ClusterModel m;
    m.k = 1;
    m.dim = kFeatureCount;
    m.centroids.assign(1, std::vector<double>(kFeatureCount, 0.0));
    m.assignment.assign(n, 0);
    return m;
}

ClusterModel singletons(std::size_t n) {
    ClusterModel m;
    m.k = n;
    m.dim = kFeatureCount;
    m.centroids.assign(n, std::vector<double>(kFeatureCount, 0.0));
    m.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        m.assignment[i] = static_cast<std::uint32_t>(n - 1 - i); // reversed ids
    return m;
}

} // namespace

TEST_SUITE("policyeval") {

TEST_CASE("lifting through a singleton abstraction reindexes the policy") {
    const auto model = singletons(6);
    const std::vector<int> abstract{0, 1, 1, 0, 1, 0};
    const auto lifted = lift_policy(abstract, model);
    for (std::size_t s = 0; s < 6; ++s)
        CHECK(lifted[s] == abstract[5 - s]);
}

TEST_CASE("lifting through one cluster is constant") {
    const auto lifted = lift_policy({1}, single_cluster(100));
    for (int a : lifted)
        CHECK(a == 1);
    CHECK_THROWS_AS(lift_policy({1, 0}, single_cluster(10)), ConfigError);
}

TEST_CASE("lifted actions follow cluster membership") {
    const auto model = fit_kme(state_points(BinningScheme::binary()), 30, {});
    std::vector<int> actions(30);
    for (std::size_t c = 0; c < 30; ++c)
        actions[c] = static_cast<int>(c % 3 == 0);
    const auto lifted = lift_policy(actions, model);
    std::mt19937_64 rng(1);
    const auto members = model.members();
    for (int i = 0; i < 100; ++i) {
        const std::size_t s = rng() % 512;
        // find the owning cluster from the member lists instead of the assignment
        std::size_t owner = 0;
        for (std::size_t c = 0; c < members.size(); ++c)
            if (std::find(members[c].begin(), members[c].end(), s) != members[c].end())
                owner = c;
        CHECK(lifted[s] == actions[owner]);
    }
}

TEST_CASE("accuracy of perfect and inverted policies") {
    const std::vector<std::uint8_t> risky{1, 0, 0, 1, 0};
    std::vector<int> perfect(5), inverted(5);
    for (std::size_t i = 0; i < 5; ++i) {
        perfect[i] = risky[i] ? kRemain : kJump;
        inverted[i] = 1 - perfect[i];
    }
    const auto good = accuracy(perfect, risky);
    CHECK(good.accuracy() == 1.0);
    CHECK(good.risky_remain == 2);
    CHECK(good.safe_jump == 3);
    const auto bad = accuracy(inverted, risky);
    CHECK(bad.accuracy() == 0.0);
    CHECK(bad.risky_jump == 2);
    CHECK(bad.safe_remain == 3);
    CHECK(bad.total() == 5);
    CHECK_THROWS_AS(accuracy({0, 1}, risky), ConfigError);
}

TEST_CASE("counts partition the space") {
    std::mt19937_64 rng(3);
    std::vector<int> actions(1000);
    std::vector<std::uint8_t> risky(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
        actions[i] = static_cast<int>(rng() % 2);
        risky[i] = static_cast<std::uint8_t>(rng() % 2);
    }
    const auto c = accuracy(actions, risky);
    CHECK(c.risky_remain + c.risky_jump + c.safe_remain + c.safe_jump == 1000);
    CHECK(c.favorable() == c.risky_remain + c.safe_jump);
    CHECK(c.accuracy() >= 0.0);
    CHECK(c.accuracy() <= 1.0);
}

TEST_CASE("abstract labels use the mean member risk") {
    const auto scheme = BinningScheme::binary();
    const RiskParams p;
    const auto labels = label_states(scheme, p);
    // cluster 0 = {all-safe, all-risky}: mean 5500 is not above the threshold
    ClusterModel m = single_cluster(512);
    m.k = 3;
    m.centroids.resize(3, std::vector<double>(kFeatureCount, 0.0));
    for (auto& a : m.assignment)
        a = 1;
    m.assignment[0] = 0;
    m.assignment[511] = 0;
    m.assignment[504] = 2; // codes (1,1,1,1,1,1,0): no attack, everything else unsafe
    const auto abstract = abstract_risk_labels(m, labels, p);
    CHECK(labels.risk[504] == 8000.0);
    CHECK(abstract[0] == 0);
    CHECK(abstract[2] == 1);
}

TEST_CASE("report counts match an independently derived labeling") {
    const auto scheme = BinningScheme::standard();
    const RiskParams p;
    const auto labels = label_states(scheme, p);

    // labels re-derived by hand from the codes
    const auto radix = scheme.radices();
    std::vector<std::uint8_t> risky(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto st = state_from_index(i, scheme);
        risky[i] = oracle::risk_from_codes(st.codes, radix, p.weights) > 5500.0;
    }
    std::mt19937_64 rng(4);
    std::vector<int> actions(labels.size());
    for (auto& a : actions)
        a = static_cast<int>(rng() % 2);
    const auto ours = accuracy(actions, labels.risky);
    const auto theirs = accuracy(actions, risky);
    CHECK(ours.risky_remain == theirs.risky_remain);
    CHECK(ours.risky_jump == theirs.risky_jump);
    CHECK(ours.safe_remain == theirs.safe_remain);
    CHECK(ours.safe_jump == theirs.safe_jump);
}

TEST_CASE("singleton abstraction at a small discount is perfectly accurate") {
    const auto scheme = BinningScheme::binary();
    const RiskParams p;
    const auto labels = label_states(scheme, p);
    const auto pts = state_points(scheme);
    const auto model = fit_kme(pts, 512, {});

    // any observed path will do; the reward gap dominates at gamma 0.1
    std::mt19937_64 rng(6);
    std::vector<std::size_t> traj(300);
    for (auto& t : traj)
        t = model.map_state(rng() % 512);
    const auto mdp = build_mdp(model, traj, labels, p, 0.1);
    const auto policy = policy_iteration(mdp, 0.1);
    const auto report = evaluate_policy_accuracy(policy, model, labels, p);
    CHECK(report.original_accuracy() == 1.0);
    CHECK(report.abstract_accuracy() == 1.0);
    CHECK(report.original_counts.total() == 512);
    CHECK(report.abstract_counts.total() == 512);
}

}
