// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "riskmdp/errors.hpp"
#include "riskmdp/pipeline.hpp"

#include "support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace riskmdp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_seconds; // 0 means no time limit
    std::function<Outcome()> body;
};

fs::path g_out;

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

// Full-scale run shared by the solver agreement and residual checks.
const PipelineResult& full_run() {
    static const PipelineResult result = [] {
        PipelineConfig c;
        c.out_dir = g_out / "full";
        c.k = 1000;
        c.gamma = 0.1;
        c.solver = "all";
        return run_pipeline(c);
    }();
    return result;
}

Outcome state_space() {
    const auto n = state_space_size(BinningScheme::standard());
    const auto states = enumerate_states(BinningScheme::standard());
    return {n == 51200 && states.size() == 51200, "|S| = " + std::to_string(n) + ", enumerated " +
                                                      std::to_string(states.size())};
}

Outcome threshold() {
    const double r = risk_threshold(RiskParams{});
    return {r == 5500.0, "R_th = " + fmt(r)};
}

Outcome self_transition_bound() {
    const auto labels = label_states(BinningScheme::standard(), RiskParams{});
    const auto [lo, hi] = std::minmax_element(labels.risk.begin(), labels.risk.end());
    double worst = 1.0;
    std::size_t risky = 0;
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (!labels.risky[s])
            continue;
        ++risky;
        worst = std::min(worst, self_transition_prob(labels.risk[s], *lo, *hi));
    }
    return {risky > 0 && worst > 0.75,
            std::to_string(risky) + " risky states, smallest t_s = " + fmt(worst)};
}

Outcome solver_agreement() {
    const auto& r = full_run();
    const auto* reference = &r.policies.front();
    bool same = true;
    std::string tags;
    for (const auto& p : r.policies) {
        if (!is_discounted(p.solver))
            continue;
        tags += (tags.empty() ? "" : ",") + to_string(p.solver);
        same = same && p.actions == reference->actions;
    }
    return {same, tags + " on K=" + std::to_string(r.mdp.k) + ", original accuracy " +
                      fmt(r.accuracy.original_accuracy())};
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> gamma_dist(0.05, 0.95);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + rng() % 6;
        const double gamma = gamma_dist(rng);
        const auto mdp = oracle::random_mdp(rng, k, gamma);
        const auto best = oracle::brute_force_optimal_values(mdp, gamma);
        for (auto kind : kAllSolvers) {
            if (!is_discounted(kind))
                continue;
            const auto value = oracle::policy_value(mdp, solve(kind, mdp, gamma).actions, gamma);
            for (std::size_t s = 0; s < k; ++s)
                worst = std::max(worst, std::abs(value[s] - best[s]));
        }
    }
    return {worst <= 1e-9, "200 models, max |V_pi - V*| = " + fmt(worst)};
}

Outcome residuals() {
    const auto& r = full_run();
    bool ok = true;
    std::string detail;
    for (const auto& p : r.policies) {
        const double res = is_discounted(p.solver) ? bellman_residual(r.mdp, p.values, r.mdp.gamma)
                                                   : relative_bellman_residual(r.mdp, p.values, p.gain);
        ok = ok && res <= 1e-6;
        detail += (detail.empty() ? "" : ", ") + to_string(p.solver) + "=" + fmt(res);
    }
    return {ok, detail};
}

Outcome singleton_optimality() {
    PipelineConfig c;
    c.out_dir = g_out / "singleton";
    c.scheme = BinningScheme::binary();
    c.k = state_space_size(c.scheme);
    c.gamma = 0.1;
    c.solver = "MPI";
    const auto r = run_pipeline(c);
    const double acc = r.accuracy.original_accuracy();
    return {acc == 1.0 && mean_squared_error(state_points(c.scheme), r.model) == 0.0,
            "|S| = " + std::to_string(c.k) + ", original accuracy " + fmt(acc)};
}

Outcome row_stochastic() {
    const auto scheme = BinningScheme::binary();
    const auto pts = state_points(scheme);
    const auto labels = label_states(scheme, RiskParams{});
    std::vector<ClusterModel> models;
    for (std::size_t k : {3u, 40u, 512u})
        models.push_back(fit_kme(pts, k, {}));
    std::mt19937_64 rng(99);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto& model = models[static_cast<std::size_t>(trial) % models.size()];
        std::vector<std::size_t> states(1 + rng() % 400);
        for (auto& s : states)
            s = rng() % pts.rows();
        const auto mdp = build_mdp(model, abstract_trajectory(model, states), labels, RiskParams{}, 0.5);
        for (const auto& p : mdp.transition) {
            worst = std::max(worst, (p.rowwise().sum().array() - 1.0).abs().maxCoeff());
            if (p.minCoeff() < 0.0)
                worst = std::max(worst, 1.0);
        }
    }
    return {worst <= 1e-9, "100 trajectories, max |row sum - 1| = " + fmt(worst)};
}

Outcome prediction_conservation() {
    std::mt19937_64 rng(4242);
    double mass_err = 0.0, passage_err = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + rng() % 5;
        const auto mdp = oracle::random_mdp(rng, k, 0.5);
        std::vector<int> actions(k);
        std::vector<std::uint8_t> risky(k);
        for (std::size_t s = 0; s < k; ++s) {
            actions[s] = static_cast<int>(rng() % 2);
            risky[s] = static_cast<std::uint8_t>(s != 0 && rng() % 3 == 0);
        }
        PredictionParams params;
        params.horizon = 1 + rng() % 5;
        mass_err = std::max(mass_err, std::abs(mass_balance(predict(mdp, actions, risky, 0, params)).total() - 1.0));

        params.probability_floor = 0.0;
        params.branching_cap = k;
        const auto tree = predict(mdp, actions, risky, 0, params);
        mass_err = std::max(mass_err, std::abs(mass_balance(tree).total() - 1.0));
        const auto hits = oracle::first_passage(mdp, actions, risky, 0, params.horizon);
        std::map<std::pair<std::size_t, std::size_t>, double> ours;
        for (const auto& f : risk_report(tree))
            ours[{f.depth, f.state}] += f.probability;
        for (std::size_t d = 1; d <= params.horizon; ++d)
            for (std::size_t s = 0; s < k; ++s) {
                const auto it = ours.find({d, s});
                const double got = it == ours.end() ? 0.0 : it->second;
                passage_err = std::max(passage_err, std::abs(got - hits[d][s]));
            }
    }
    return {mass_err <= 1e-9 && passage_err <= 1e-9,
            "max mass error " + fmt(mass_err) + ", max first-passage error " + fmt(passage_err)};
}

// Relative slack absorbs summation rounding once the objective stops moving.
bool non_increasing(const std::vector<double>& v, double slack, const std::vector<std::size_t>& skip = {}) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::find(skip.begin(), skip.end(), i) != skip.end())
            continue;
        if (v[i] > v[i - 1] + slack * std::abs(v[i - 1]))
            return false;
    }
    return true;
}

Outcome monotone_clustering() {
    const auto pts = state_points(BinningScheme::standard());
    FitOptions o;
    FitTrace kme, kmm, gmm;
    fit_kme(pts, 250, o, &kme);
    fit_kmm(pts, 250, o, &kmm);
    fit_gmm(pts, 250, o, &gmm);
    std::vector<double> negated_ll(gmm.objective.size());
    std::transform(gmm.objective.begin(), gmm.objective.end(), negated_ll.begin(), [](double x) { return -x; });
    const auto curve = elbow(pts, {250, 500, 750, 1000}, o);
    bool elbow_ok = true;
    std::string mse;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        elbow_ok = elbow_ok && (i == 0 || curve[i].mse <= curve[i - 1].mse);
        mse += (i ? "/" : "") + fmt(curve[i].mse);
    }
    const bool a = non_increasing(kme.objective, 1e-12);
    const bool b = non_increasing(kmm.objective, 1e-12);
    const bool c = non_increasing(negated_ll, 1e-9, gmm.reinit_iterations);
    return {a && b && c && elbow_ok,
            std::string("KME ") + (a ? "ok" : "bad") + " (" + std::to_string(kme.objective.size()) + " it), KMM " +
                (b ? "ok" : "bad") + " (" + std::to_string(kmm.objective.size()) + " it), GMM " + (c ? "ok" : "bad") +
                " (" + std::to_string(gmm.objective.size()) + " it), elbow MSE " + mse};
}

bool numeric_cell(const std::string& s) {
    if (s.empty())
        return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end && *end == '\0';
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        if (!line.empty() && line.back() == ',')
            cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

bool table_ok(const std::string& text, const std::string& header, std::size_t rows, std::size_t numeric_from,
              std::size_t numeric_to) {
    const auto t = parse_csv(text);
    if (t.size() != rows + 1 || text.rfind(header + "\n", 0) != 0)
        return false;
    for (std::size_t r = 1; r < t.size(); ++r) {
        if (t[r].size() != t[0].size())
            return false;
        for (std::size_t c = numeric_from; c < numeric_to; ++c)
            if (!numeric_cell(t[r][c]))
                return false;
    }
    return true;
}

void write(const fs::path& path, const std::string& text) {
    std::ofstream(path) << text;
}

Outcome report_tables() {
    PipelineConfig c;
    c.out_dir = g_out / "tables";
    fs::create_directories(c.out_dir);

    const auto sweep = sweep_clustering(c);
    const auto exp1 = clustering_csv(sweep);
    const auto exp1_elbow = elbow_csv(sweep.elbow);
    const auto exp2 = bench_csv(bench_solvers(c));
    const auto exp3 = gamma_csv(sweep_gamma(c));
    write(c.out_dir / artifact::sweep_clustering, exp1);
    write(c.out_dir / artifact::sweep_elbow, exp1_elbow);
    write(c.out_dir / artifact::bench_solvers, exp2);
    write(c.out_dir / artifact::sweep_gamma, exp3);
    std::cout << exp1 << '\n' << exp1_elbow << '\n' << exp2 << '\n' << exp3 << '\n';

    const bool t1 = table_ok(exp1, "algorithm,k,abstract_acc,original_acc,mse,status", 12, 1, 5);
    const bool t1e = table_ok(exp1_elbow, "k,mse", 4, 0, 2);
    const bool t2 = table_ok(exp2, "solver,seconds,iterations,agrees_with_mpi", 5, 1, 3);
    const bool t3 = table_ok(exp3, "gamma,abstract_acc,original_acc", 9, 0, 3);
    std::size_t failed = 0;
    for (const auto& cell : sweep.cells)
        failed += !cell.ok;
    return {t1 && t1e && t2 && t3, "clustering " + std::string(t1 ? "ok" : "bad") + " (" + std::to_string(failed) +
                                       " failed cells), elbow " + (t1e ? "ok" : "bad") + ", solver bench " +
                                       (t2 ? "ok" : "bad") + ", discount sweep " + (t3 ? "ok" : "bad") +
                                       "; tables in " + c.out_dir.string()};
}

} // namespace

int main(int argc, char** argv) {
    g_out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "riskmdp_acceptance";
    fs::remove_all(g_out);
    fs::create_directories(g_out);

    const std::vector<Criterion> criteria{
        {1, "state space size", 1.0, state_space},
        {2, "risk threshold", 0.0, threshold},
        {3, "risky self-transition bound", 1.0, self_transition_bound},
        {4, "solver agreement at full scale", 60.0, solver_agreement},
        {5, "brute-force oracle equivalence", 30.0, oracle_equivalence},
        {6, "bellman residuals at full scale", 10.0, residuals},
        {7, "singleton abstraction optimality", 10.0, singleton_optimality},
        {8, "row stochasticity", 10.0, row_stochastic},
        {9, "prediction conservation", 30.0, prediction_conservation},
        {10, "monotone clustering", 120.0, monotone_clustering},
        {11, "report tables", 0.0, report_tables},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.body();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool pass = out.pass;
        if (c.budget_seconds > 0.0 && secs > c.budget_seconds) {
            pass = false;
            out.detail += " [over the " + fmt(c.budget_seconds) + " s budget]";
        }
        failures += !pass;
        std::printf("%s %2d %s: %s (%.3f s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), out.detail.c_str(),
                    secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
