// riskmdp: command-line front end for the risk-MDP pipeline.

#include "riskmdp/errors.hpp"
#include "riskmdp/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using riskmdp::PipelineConfig;

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> records;
    std::optional<std::string> algorithm;
    std::optional<std::size_t> k;
    std::optional<double> gamma;
    std::optional<std::string> solver;
    std::optional<std::size_t> root;
    std::optional<std::size_t> horizon;
    std::optional<double> probability_floor;
    std::optional<std::size_t> branching_cap;
    std::vector<std::string> algorithms;
    std::vector<std::size_t> k_list;
    std::vector<double> gammas;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "pipeline configuration JSON");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--out-dir", o.out_dir, "artifact directory");
    cmd->add_option("--records", o.records, "records CSV to ingest instead of simulating");
    cmd->add_option("--algorithm", o.algorithm, "KME, KMM or GMM");
    cmd->add_option("-k,--clusters", o.k, "number of abstract states");
    cmd->add_option("--gamma", o.gamma, "discount factor");
    cmd->add_option("--solver", o.solver, "VI, PI, MPI, RVI, GS-VI or all");
    cmd->add_option("--root", o.root, "abstract root state for prediction");
    cmd->add_option("--horizon", o.horizon, "prediction depth");
    cmd->add_option("--probability-floor", o.probability_floor, "minimum edge probability kept in the tree");
    cmd->add_option("--branching", o.branching_cap, "maximum children per tree node");
}

PipelineConfig resolve(const Overrides& o) {
    PipelineConfig c = o.config_path.empty() ? PipelineConfig{} : riskmdp::load_pipeline_config(o.config_path);
    if (o.seed)
        c.seed = *o.seed;
    if (o.out_dir)
        c.out_dir = *o.out_dir;
    if (o.records)
        c.records_in = *o.records;
    if (o.algorithm)
        c.algorithm = riskmdp::cluster_algorithm_from_string(*o.algorithm);
    if (o.k)
        c.k = *o.k;
    if (o.gamma)
        c.gamma = *o.gamma;
    if (o.solver)
        c.solver = *o.solver;
    if (o.root)
        c.root = *o.root;
    if (o.horizon)
        c.prediction.horizon = *o.horizon;
    if (o.probability_floor)
        c.prediction.probability_floor = *o.probability_floor;
    if (o.branching_cap)
        c.prediction.branching_cap = *o.branching_cap;
    if (!o.algorithms.empty()) {
        c.sweep_algorithms.clear();
        for (const auto& a : o.algorithms)
            c.sweep_algorithms.push_back(riskmdp::cluster_algorithm_from_string(a));
    }
    if (!o.k_list.empty())
        c.sweep_k = o.k_list;
    if (!o.gammas.empty())
        c.sweep_gammas = o.gammas;
    c.validate();
    return c;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw riskmdp::DataError("cannot write " + path.string());
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Risk-state abstraction MDP pipeline for web-service traffic"};
    app.require_subcommand(1);
    app.fallthrough();
    Overrides o;
    bool with_elbow = false;
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress progress output");

    auto* simulate = app.add_subcommand("simulate", "generate synthetic per-second feature records");
    auto* discretize = app.add_subcommand("discretize", "bin records into original states");
    auto* abstract = app.add_subcommand("abstract", "cluster the original state space");
    auto* build = app.add_subcommand("build", "construct rewards and transitions");
    auto* solve = app.add_subcommand("solve", "solve the abstract MDP");
    auto* evaluate = app.add_subcommand("evaluate", "policy accuracy in abstract and original space");
    auto* predict = app.add_subcommand("predict", "expand the risk prediction tree");
    auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");
    auto* sweep_clustering = app.add_subcommand("sweep-clustering", "accuracy per algorithm and cluster count");
    auto* sweep_gamma = app.add_subcommand("sweep-gamma", "accuracy per discount factor");
    auto* bench = app.add_subcommand("bench-solvers", "solver timing and agreement");

    for (auto* cmd : app.get_subcommands({}))
        add_common(cmd, o);
    abstract->add_flag("--elbow", with_elbow, "also write the elbow curve over the sweep K list");
    for (auto* cmd : {abstract, sweep_clustering})
        cmd->add_option("--k-list", o.k_list, "cluster counts")->delimiter(',');
    sweep_clustering->add_option("--algorithms", o.algorithms, "algorithms to compare")->delimiter(',');
    sweep_gamma->add_option("--gammas", o.gammas, "discount factors")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::ostream* log = quiet ? nullptr : &std::clog;
    try {
        const PipelineConfig config = resolve(o);
        const auto& dir = config.out_dir;
        if (*simulate)
            riskmdp::run_simulate_stage(config);
        else if (*discretize)
            riskmdp::run_discretize_stage(config);
        else if (*abstract)
            riskmdp::run_abstract_stage(config, with_elbow);
        else if (*build)
            riskmdp::run_build_stage(config);
        else if (*solve)
            riskmdp::run_solve_stage(config);
        else if (*evaluate)
            riskmdp::run_evaluate_stage(config);
        else if (*predict)
            riskmdp::run_predict_stage(config);
        else if (*pipeline)
            std::cout << riskmdp::summary_line(riskmdp::run_pipeline(config, log)) << '\n';
        else if (*sweep_clustering) {
            const auto sweep = riskmdp::sweep_clustering(config, log);
            write_file(dir / riskmdp::artifact::sweep_clustering, riskmdp::clustering_csv(sweep));
            write_file(dir / riskmdp::artifact::sweep_elbow, riskmdp::elbow_csv(sweep.elbow));
            std::cout << riskmdp::clustering_csv(sweep);
        } else if (*sweep_gamma) {
            const auto csv = riskmdp::gamma_csv(riskmdp::sweep_gamma(config, log));
            write_file(dir / riskmdp::artifact::sweep_gamma, csv);
            std::cout << csv;
        } else if (*bench) {
            const auto csv = riskmdp::bench_csv(riskmdp::bench_solvers(config, log));
            write_file(dir / riskmdp::artifact::bench_solvers, csv);
            std::cout << csv;
        }
    } catch (const riskmdp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const riskmdp::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const riskmdp::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
