#include "riskmdp/errors.hpp"
#include "riskmdp/pipeline.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace riskmdp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

PipelineConfig small_config(const std::string& name) {
    PipelineConfig c;
    c.out_dir = fs::temp_directory_path() / name;
    fs::remove_all(c.out_dir);
    c.k = 60;
    c.seed = 3;
    c.solver = "all";
    return c;
}

std::size_t line_count(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("full run writes a complete bundle") {
    const auto c = small_config("riskmdp_pipeline_full");
    std::ostringstream log;
    const auto r = run_pipeline(c, &log);
    for (const char* name : {artifact::records, artifact::scheme, artifact::trajectory, artifact::cluster_model,
                             artifact::mdp, artifact::policy, artifact::solver_report, artifact::accuracy,
                             artifact::accuracy_csv, artifact::tree, artifact::tree_text, artifact::prediction,
                             artifact::config})
        CHECK_MESSAGE(fs::exists(c.out_dir / name), name);
    CHECK(fs::exists(c.out_dir / "mdp.json.bin"));
    for (auto kind : kAllSolvers)
        CHECK(fs::exists(c.out_dir / artifact::policy_file(kind)));
    CHECK_FALSE(fs::exists(c.out_dir / artifact::partial));
    CHECK(r.policy.solver == SolverKind::modified_policy_iteration);
    CHECK_FALSE(r.abstract_risky[r.root]);

    const auto line = summary_line(r);
    CHECK(line.find("abstract_acc=") != std::string::npos);
    CHECK(line.find("original_acc=") != std::string::npos);
    CHECK(log.str().find("[predict]") != std::string::npos);
    fs::remove_all(c.out_dir);
}

TEST_CASE("every artifact reloads through its own reader") {
    const auto c = small_config("riskmdp_pipeline_reload");
    const auto r = run_pipeline(c);
    const auto& d = c.out_dir;
    CHECK(load_records(d / artifact::records) == r.data.records);
    const auto scheme = load_artifact<BinningScheme>(d / artifact::scheme);
    CHECK(scheme == c.scheme);
    CHECK(load_trajectory(d / artifact::trajectory, scheme).indices == r.data.trajectory.indices);
    CHECK(load_artifact<ClusterModel>(d / artifact::cluster_model) == r.model);
    const auto mdp = load_mdp(d / artifact::mdp);
    CHECK(mdp.transition[0] == r.mdp.transition[0]);
    CHECK(mdp.reward == r.mdp.reward);
    CHECK(load_artifact<Policy>(d / artifact::policy).actions == r.policy.actions);
    CHECK(load_artifact<AccuracyReport>(d / artifact::accuracy).original_counts.favorable() ==
          r.accuracy.original_counts.favorable());
    CHECK(load_artifact<PredictionTree>(d / artifact::tree).nodes.size() == r.tree.nodes.size());
    CHECK(load_risk_report(d / artifact::prediction).size() == r.forecast.size());
    const auto cfg = load_pipeline_config(d / artifact::config);
    CHECK(cfg.k == c.k);
    CHECK(cfg.seed == c.seed);
    fs::remove_all(d);
}

TEST_CASE("same seed reproduces identical artifacts") {
    const auto c = small_config("riskmdp_pipeline_determinism");
    run_pipeline(c);
    std::map<std::string, std::string> first;
    for (const auto& e : fs::directory_iterator(c.out_dir))
        first[e.path().filename().string()] = slurp(e.path());
    run_pipeline(c);
    for (const auto& [name, bytes] : first) {
        CAPTURE(name);
        const auto again = slurp(c.out_dir / name);
        if (name.rfind("policy", 0) == 0) {
            auto a = json::parse(bytes), b = json::parse(again);
            a.erase("seconds");
            b.erase("seconds");
            CHECK(a == b);
        } else if (name == artifact::solver_report) {
            CHECK(line_count(again) == line_count(bytes));
        } else {
            CHECK(again == bytes);
        }
    }
    fs::remove_all(c.out_dir);
}

TEST_CASE("stage failures name the stage and leave a marker") {
    auto c = small_config("riskmdp_pipeline_failure");
    c.k = 60000;
    try {
        run_pipeline(c);
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("abstract") != std::string::npos);
    }
    CHECK(fs::exists(c.out_dir / artifact::partial));
    CHECK(slurp(c.out_dir / artifact::partial).find("stage: abstract") != std::string::npos);
    // earlier stages are kept
    CHECK(fs::exists(c.out_dir / artifact::trajectory));
    fs::remove_all(c.out_dir);
}

TEST_CASE("bad records surface as data errors") {
    auto c = small_config("riskmdp_pipeline_badrecords");
    fs::create_directories(c.out_dir);
    c.records_in = c.out_dir / "in.csv";
    std::ofstream(c.records_in) << "t,http_requests\n0,1\n";
    CHECK_THROWS_AS(run_pipeline(c), DataError);
    c.records_in = c.out_dir / "missing.csv";
    CHECK_THROWS_AS(run_pipeline(c), DataError);
    fs::remove_all(c.out_dir);
}

TEST_CASE("configuration validation") {
    PipelineConfig c;
    c.k = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.gamma = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.gamma = 1.0;
    CHECK_NOTHROW(c.validate());
    c.solver = "QL";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.sweep_gammas = {0.5, 1.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("stages run one by one from artifacts") {
    auto c = small_config("riskmdp_pipeline_stages");
    c.solver = "PI";
    run_simulate_stage(c);
    run_discretize_stage(c);
    c.sweep_k = {20, 40};
    run_abstract_stage(c, true);
    run_build_stage(c);
    run_solve_stage(c);
    run_evaluate_stage(c);
    run_predict_stage(c);
    const auto elbow = slurp(c.out_dir / artifact::elbow);
    CHECK(elbow.rfind("k,mse\n20,", 0) == 0);
    CHECK(line_count(elbow) == 3);
    CHECK(fs::exists(c.out_dir / artifact::prediction));
    CHECK(load_artifact<Policy>(c.out_dir / artifact::policy).solver == SolverKind::policy_iteration);

    // the staged run matches the one-shot pipeline
    auto whole = c;
    whole.out_dir = fs::temp_directory_path() / "riskmdp_pipeline_stages_whole";
    const auto r = run_pipeline(whole);
    CHECK(load_artifact<Policy>(c.out_dir / artifact::policy).actions == r.policy.actions);
    CHECK(slurp(c.out_dir / artifact::accuracy) == slurp(whole.out_dir / artifact::accuracy));
    fs::remove_all(c.out_dir);
    fs::remove_all(whole.out_dir);
}

TEST_CASE("explicit root must be safe") {
    auto c = small_config("riskmdp_pipeline_root");
    const auto r = run_pipeline(c);
    std::size_t risky_root = r.abstract_risky.size();
    for (std::size_t s = 0; s < r.abstract_risky.size(); ++s)
        if (r.abstract_risky[s])
            risky_root = s;
    REQUIRE(risky_root < r.abstract_risky.size());
    c.root = risky_root;
    CHECK_THROWS_AS(run_pipeline(c), ConfigError);
    fs::remove_all(c.out_dir);
}

TEST_CASE("root selection takes the last safe step") {
    CHECK(select_root({3, 1, 2, 0}, {1, 0, 1, 1}) == 1);
    CHECK(select_root({0, 2}, {0, 1, 1}) == 0);
    CHECK_THROWS_AS(select_root({1, 2}, {0, 1, 1}), ConfigError);
}

TEST_CASE("clustering sweep table") {
    auto c = small_config("riskmdp_pipeline_sweep");
    c.sweep_k = {20, 40};
    const auto sweep = sweep_clustering(c);
    REQUIRE(sweep.cells.size() == 6);
    CHECK(sweep.cells[0].algorithm == ClusterAlgorithm::kme);
    CHECK(sweep.cells[5].algorithm == ClusterAlgorithm::gmm);
    CHECK(sweep.cells[5].k == 40);
    for (const auto& cell : sweep.cells)
        CHECK(cell.ok);
    const auto csv = clustering_csv(sweep);
    CHECK(csv.rfind("algorithm,k,abstract_acc,original_acc,mse,status\n", 0) == 0);
    CHECK(line_count(csv) == 7);
    REQUIRE(sweep.elbow.size() == 2);
    CHECK(sweep.elbow[1].mse <= sweep.elbow[0].mse);
}

TEST_CASE("failed sweep cells are marked and the sweep continues") {
    auto c = small_config("riskmdp_pipeline_sweep_fail");
    c.sweep_algorithms = {ClusterAlgorithm::kme};
    c.sweep_k = {70000, 30};
    const auto sweep = sweep_clustering(c);
    REQUIRE(sweep.cells.size() == 2);
    CHECK_FALSE(sweep.cells[0].ok);
    CHECK(sweep.cells[1].ok);
    CHECK(clustering_csv(sweep).find("KME,70000,,,,failed") != std::string::npos);
}

TEST_CASE("singleton sweep row is perfectly accurate") {
    auto c = small_config("riskmdp_pipeline_sweep_singleton");
    c.scheme = BinningScheme::binary();
    c.sweep_algorithms = {ClusterAlgorithm::kme};
    c.sweep_k = {512};
    const auto sweep = sweep_clustering(c);
    REQUIRE(sweep.cells.size() == 1);
    CHECK(sweep.cells[0].original_accuracy == 1.0);
    CHECK(sweep.cells[0].mse == 0.0);
}

TEST_CASE("gamma sweep") {
    auto c = small_config("riskmdp_pipeline_gamma");
    c.sweep_gammas = {0.1, 0.5, 0.5, 0.9};
    const auto rows = sweep_gamma(c);
    REQUIRE(rows.size() == 4);
    CHECK(rows[1].original_accuracy == rows[2].original_accuracy);
    CHECK(rows[1].abstract_accuracy == rows[2].abstract_accuracy);
    const auto csv = gamma_csv(rows);
    CHECK(csv.rfind("gamma,abstract_acc,original_acc\n0.1,", 0) == 0);
}

TEST_CASE("solver bench") {
    const auto c = small_config("riskmdp_pipeline_bench");
    const auto rows = bench_solvers(c);
    REQUIRE(rows.size() == 5);
    for (const auto& r : rows) {
        CHECK(r.seconds > 0.0);
        if (is_discounted(r.solver))
            CHECK(r.agrees_with_mpi);
    }
    const auto again = bench_solvers(c);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(again[i].agrees_with_mpi == rows[i].agrees_with_mpi);
    CHECK(bench_csv(rows).rfind("solver,seconds,iterations,agrees_with_mpi\nVI,", 0) == 0);
}

}
