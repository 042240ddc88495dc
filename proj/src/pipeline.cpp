#include "riskmdp/pipeline.hpp"

#include "riskmdp/errors.hpp"
#include "text.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace riskmdp {

namespace fs = std::filesystem;

std::string artifact::policy_file(SolverKind kind) {
    return "policy_" + to_string(kind) + ".json";
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << text;
}

[[noreturn]] void rethrow_with_stage(const std::string& stage, const fs::path& out_dir) {
    auto mark = [&](const std::string& message) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        std::ofstream marker(out_dir / artifact::partial);
        marker << "stage: " << stage << "\nerror: " << message << '\n';
        return "stage '" + stage + "': " + message;
    };
    try {
        throw;
    } catch (const ConfigError& e) {
        throw ConfigError(mark(e.what()));
    } catch (const DataError& e) {
        throw DataError(mark(e.what()));
    } catch (const NumericError& e) {
        throw NumericError(mark(e.what()));
    } catch (const std::out_of_range& e) {
        throw ConfigError(mark(e.what()));
    } catch (const std::exception& e) {
        throw Error(mark(e.what()));
    }
}

template <class F>
auto stage(const std::string& name, const fs::path& out_dir, std::ostream* log, F&& body) {
    if (log)
        *log << "[" << name << "]\n";
    try {
        return body();
    } catch (...) {
        rethrow_with_stage(name, out_dir);
    }
}

SolverKind primary_solver(const PipelineConfig& config) {
    return config.solver == "all" ? SolverKind::modified_policy_iteration : solver_from_string(config.solver);
}

std::vector<Policy> run_solvers(const PipelineConfig& config, const MdpModel& mdp) {
    if (config.solver == "all")
        return solve_all(mdp, config.gamma, config.solver_options).policies;
    return {solve(solver_from_string(config.solver), mdp, config.gamma, config.solver_options)};
}

const Policy& find_policy(const std::vector<Policy>& policies, SolverKind kind) {
    for (const auto& p : policies)
        if (p.solver == kind)
            return p;
    throw ConfigError("solver " + to_string(kind) + " was not run");
}

std::vector<BenchRow> bench_rows(const std::vector<Policy>& policies) {
    const auto* mpi = &find_policy(policies, SolverKind::modified_policy_iteration);
    std::vector<BenchRow> rows;
    for (const auto& p : policies)
        rows.push_back({p.solver, p.seconds, p.iterations, p.actions == mpi->actions});
    return rows;
}

void ensure_out_dir(const PipelineConfig& config) {
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec)
        throw DataError("cannot create output directory " + config.out_dir.string() + ": " + ec.message());
}

std::vector<FeatureRecord> acquire_records(const PipelineConfig& config) {
    if (!config.records_in.empty())
        return load_records(config.records_in);
    return simulate(config.simulation_config());
}

fs::path records_path(const PipelineConfig& config) {
    return config.records_in.empty() ? config.out_dir / artifact::records : config.records_in;
}

} // namespace

// --- configuration ---------------------------------------------------------

PipelineConfig::PipelineConfig() {
    simulation.attack_schedule = default_attack_schedule(simulation.duration_steps);
}

void PipelineConfig::validate() const {
    simulation_config().validate();
    scheme.validate_record_layout();
    risk.validate();
    prediction.validate();
    if (k < 1)
        throw ConfigError("k must be at least 1");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw ConfigError("gamma must lie in (0, 1]");
    if (solver != "all")
        solver_from_string(solver);
    solver_from_string(sweep_solver);
    for (double g : sweep_gammas)
        if (!(g > 0.0 && g < 1.0))
            throw ConfigError("sweep gammas must lie in (0, 1)");
    for (auto kk : sweep_k)
        if (kk < 1)
            throw ConfigError("sweep cluster counts must be at least 1");
}

SimulationConfig PipelineConfig::simulation_config() const {
    auto s = simulation;
    s.seed = seed;
    return s;
}

FitOptions PipelineConfig::fit_options() const {
    auto f = fit;
    f.seed = seed;
    return f;
}

void to_json(json& j, const PipelineConfig& v) {
    std::vector<std::string> algorithms;
    for (auto a : v.sweep_algorithms)
        algorithms.push_back(to_string(a));
    j = json{{"records_in", v.records_in.string()},
             {"out_dir", v.out_dir.string()},
             {"seed", v.seed},
             {"simulation", v.simulation},
             {"scheme", v.scheme},
             {"abstraction",
              {{"algorithm", to_string(v.algorithm)},
               {"k", v.k},
               {"max_iterations", v.fit.max_iterations},
               {"gmm_max_iterations", v.fit.gmm_max_iterations},
               {"gmm_tolerance", v.fit.gmm_tolerance},
               {"gmm_variance_floor", v.fit.gmm_variance_floor}}},
             {"risk", v.risk},
             {"gamma", v.gamma},
             {"solver", v.solver},
             {"solver_options",
              {{"epsilon", v.solver_options.epsilon},
               {"mpi_sweeps", v.solver_options.mpi_sweeps},
               {"max_iterations", v.solver_options.max_iterations},
               {"rvi_max_iterations", v.solver_options.rvi_max_iterations},
               {"rvi_aperiodicity", v.solver_options.rvi_aperiodicity},
               {"rvi_reference_state", v.solver_options.rvi_reference_state}}},
             {"prediction", v.prediction},
             {"root", v.root ? json(*v.root) : json(nullptr)},
             {"transition_sidecar", v.transition_sidecar},
             {"sweep",
              {{"algorithms", algorithms},
               {"k", v.sweep_k},
               {"solver", v.sweep_solver},
               {"gammas", v.sweep_gammas}}}};
}

void from_json(const json& j, PipelineConfig& v) {
    const PipelineConfig d;
    v.records_in = j.value("records_in", std::string{});
    v.out_dir = j.value("out_dir", d.out_dir.string());
    v.seed = j.value("seed", d.seed);
    v.simulation = j.value("simulation", d.simulation);
    if (j.contains("simulation") && !j.at("simulation").contains("attack_schedule"))
        v.simulation.attack_schedule = default_attack_schedule(v.simulation.duration_steps);
    v.scheme = j.value("scheme", d.scheme);

    const json abstraction = j.value("abstraction", json::object());
    v.algorithm = cluster_algorithm_from_string(abstraction.value("algorithm", to_string(d.algorithm)));
    v.k = abstraction.value("k", d.k);
    v.fit.max_iterations = abstraction.value("max_iterations", d.fit.max_iterations);
    v.fit.gmm_max_iterations = abstraction.value("gmm_max_iterations", d.fit.gmm_max_iterations);
    v.fit.gmm_tolerance = abstraction.value("gmm_tolerance", d.fit.gmm_tolerance);
    v.fit.gmm_variance_floor = abstraction.value("gmm_variance_floor", d.fit.gmm_variance_floor);

    v.risk = j.value("risk", d.risk);
    v.gamma = j.value("gamma", d.gamma);
    v.solver = j.value("solver", d.solver);

    const json so = j.value("solver_options", json::object());
    v.solver_options.epsilon = so.value("epsilon", d.solver_options.epsilon);
    v.solver_options.mpi_sweeps = so.value("mpi_sweeps", d.solver_options.mpi_sweeps);
    v.solver_options.max_iterations = so.value("max_iterations", d.solver_options.max_iterations);
    v.solver_options.rvi_max_iterations = so.value("rvi_max_iterations", d.solver_options.rvi_max_iterations);
    v.solver_options.rvi_aperiodicity = so.value("rvi_aperiodicity", d.solver_options.rvi_aperiodicity);
    v.solver_options.rvi_reference_state = so.value("rvi_reference_state", d.solver_options.rvi_reference_state);

    v.prediction = j.value("prediction", d.prediction);
    v.root.reset();
    if (j.contains("root") && !j.at("root").is_null())
        v.root = j.at("root").get<std::size_t>();
    v.transition_sidecar = j.value("transition_sidecar", d.transition_sidecar);

    const json sweep = j.value("sweep", json::object());
    v.sweep_algorithms.clear();
    if (sweep.contains("algorithms")) {
        for (const auto& name : sweep.at("algorithms"))
            v.sweep_algorithms.push_back(cluster_algorithm_from_string(name.get<std::string>()));
    } else {
        v.sweep_algorithms = d.sweep_algorithms;
    }
    v.sweep_k = sweep.value("k", d.sweep_k);
    v.sweep_solver = sweep.value("solver", d.sweep_solver);
    v.sweep_gammas = sweep.value("gammas", d.sweep_gammas);
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    json j;
    try {
        j = load_json(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    try {
        auto config = j.get<PipelineConfig>();
        config.validate();
        return config;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

// --- pipeline --------------------------------------------------------------

PreparedData prepare_data(const PipelineConfig& config) {
    config.validate();
    PreparedData data;
    data.records = acquire_records(config);
    data.trajectory = discretize_all(data.records, config.scheme);
    data.labeling = label_states(config.scheme, config.risk);
    data.points = state_points(config.scheme);
    return data;
}

std::size_t select_root(const std::vector<std::size_t>& abstract_path, const std::vector<std::uint8_t>& abstract_risky) {
    for (auto it = abstract_path.rbegin(); it != abstract_path.rend(); ++it)
        if (!abstract_risky.at(*it))
            return *it;
    throw ConfigError("the observed trajectory never visits a non-risky abstract state");
}

PipelineResult run_pipeline(const PipelineConfig& config, std::ostream* log) {
    const auto& dir = config.out_dir;
    PipelineResult r;

    stage("configure", dir, log, [&] {
        config.validate();
        ensure_out_dir(config);
        fs::remove(dir / artifact::partial);
        save_artifact(dir / artifact::config, config);
    });

    stage(config.records_in.empty() ? "simulate" : "load", dir, log, [&] {
        r.data.records = acquire_records(config);
        save_records(dir / artifact::records, r.data.records);
    });

    stage("discretize", dir, log, [&] {
        r.data.trajectory = discretize_all(r.data.records, config.scheme);
        save_artifact(dir / artifact::scheme, config.scheme);
        save_trajectory(dir / artifact::trajectory, r.data.trajectory);
        r.data.labeling = label_states(config.scheme, config.risk);
        r.data.points = state_points(config.scheme);
    });

    stage("abstract", dir, log, [&] {
        r.model = fit(config.algorithm, r.data.points, config.k, config.fit_options());
        r.abstract_path = abstract_trajectory(r.model, r.data.trajectory.indices);
        save_artifact(dir / artifact::cluster_model, r.model);
    });

    stage("build", dir, log, [&] {
        r.mdp = build_mdp(r.model, r.abstract_path, r.data.labeling, config.risk, config.gamma);
        save_mdp(dir / artifact::mdp, r.mdp, config.transition_sidecar);
    });

    stage("solve", dir, log, [&] {
        r.policies = run_solvers(config, r.mdp);
        for (const auto& p : r.policies)
            save_artifact(dir / artifact::policy_file(p.solver), p);
        r.policy = find_policy(r.policies, primary_solver(config));
        save_artifact(dir / artifact::policy, r.policy);
        if (config.solver == "all")
            write_text(dir / artifact::solver_report, bench_csv(bench_rows(r.policies)));
    });

    stage("evaluate", dir, log, [&] {
        r.accuracy = evaluate_policy_accuracy(r.policy, r.model, r.data.labeling, config.risk);
        save_artifact(dir / artifact::accuracy, r.accuracy);
        write_text(dir / artifact::accuracy_csv, accuracy_csv_header() + "\n" + accuracy_csv_row(r.accuracy) + "\n");
    });

    stage("predict", dir, log, [&] {
        r.abstract_risky = abstract_risk_labels(r.model, r.data.labeling, config.risk);
        r.root = config.root ? *config.root : select_root(r.abstract_path, r.abstract_risky);
        r.tree = predict(r.mdp, r.policy.actions, r.abstract_risky, r.root, config.prediction);
        r.forecast = risk_report(r.tree);
        save_artifact(dir / artifact::tree, r.tree);
        write_text(dir / artifact::tree_text, render_tree(r.tree));
        save_risk_report(dir / artifact::prediction, r.forecast);
    });

    return r;
}

std::string summary_line(const PipelineResult& r) {
    std::ostringstream out;
    out << "pipeline: algorithm=" << to_string(r.model.algorithm) << " k=" << r.model.k
        << " solver=" << to_string(r.policy.solver) << " gamma=" << detail::format_double(r.mdp.gamma)
        << " abstract_acc=" << detail::format_double(r.accuracy.abstract_accuracy())
        << " original_acc=" << detail::format_double(r.accuracy.original_accuracy()) << " root=" << r.root
        << " risky_forecasts=" << r.forecast.size();
    return out.str();
}

// --- single stages ---------------------------------------------------------

void run_simulate_stage(const PipelineConfig& config) {
    config.validate();
    ensure_out_dir(config);
    save_records(config.out_dir / artifact::records, simulate(config.simulation_config()));
}

void run_discretize_stage(const PipelineConfig& config) {
    config.validate();
    ensure_out_dir(config);
    const auto records = load_records(records_path(config));
    save_artifact(config.out_dir / artifact::scheme, config.scheme);
    save_trajectory(config.out_dir / artifact::trajectory, discretize_all(records, config.scheme));
}

void run_abstract_stage(const PipelineConfig& config, bool with_elbow) {
    config.validate();
    ensure_out_dir(config);
    const auto points = state_points(config.scheme);
    save_artifact(config.out_dir / artifact::cluster_model,
                  fit(config.algorithm, points, config.k, config.fit_options()));
    if (with_elbow)
        write_text(config.out_dir / artifact::elbow, elbow_csv(elbow(points, config.sweep_k, config.fit_options())));
}

void run_build_stage(const PipelineConfig& config) {
    config.validate();
    const auto& dir = config.out_dir;
    const auto scheme = load_artifact<BinningScheme>(dir / artifact::scheme);
    const auto model = load_artifact<ClusterModel>(dir / artifact::cluster_model);
    const auto trajectory = load_trajectory(dir / artifact::trajectory, scheme);
    const auto labeling = label_states(scheme, config.risk);
    const auto mdp = build_mdp(model, abstract_trajectory(model, trajectory.indices), labeling, config.risk,
                               config.gamma);
    save_mdp(dir / artifact::mdp, mdp, config.transition_sidecar);
}

void run_solve_stage(const PipelineConfig& config) {
    config.validate();
    const auto& dir = config.out_dir;
    const auto mdp = load_mdp(dir / artifact::mdp);
    const auto policies = run_solvers(config, mdp);
    for (const auto& p : policies)
        save_artifact(dir / artifact::policy_file(p.solver), p);
    save_artifact(dir / artifact::policy, find_policy(policies, primary_solver(config)));
    if (config.solver == "all")
        write_text(dir / artifact::solver_report, bench_csv(bench_rows(policies)));
}

void run_evaluate_stage(const PipelineConfig& config) {
    config.validate();
    const auto& dir = config.out_dir;
    const auto scheme = load_artifact<BinningScheme>(dir / artifact::scheme);
    const auto model = load_artifact<ClusterModel>(dir / artifact::cluster_model);
    const auto policy = load_artifact<Policy>(dir / artifact::policy);
    const auto report = evaluate_policy_accuracy(policy, model, label_states(scheme, config.risk), config.risk);
    save_artifact(dir / artifact::accuracy, report);
    write_text(dir / artifact::accuracy_csv, accuracy_csv_header() + "\n" + accuracy_csv_row(report) + "\n");
}

void run_predict_stage(const PipelineConfig& config) {
    config.validate();
    const auto& dir = config.out_dir;
    const auto scheme = load_artifact<BinningScheme>(dir / artifact::scheme);
    const auto model = load_artifact<ClusterModel>(dir / artifact::cluster_model);
    const auto policy = load_artifact<Policy>(dir / artifact::policy);
    const auto mdp = load_mdp(dir / artifact::mdp);
    const auto trajectory = load_trajectory(dir / artifact::trajectory, scheme);
    const auto risky = abstract_risk_labels(model, label_states(scheme, config.risk), config.risk);
    const auto root = config.root ? *config.root : select_root(abstract_trajectory(model, trajectory.indices), risky);
    const auto tree = predict(mdp, policy.actions, risky, root, config.prediction);
    save_artifact(dir / artifact::tree, tree);
    write_text(dir / artifact::tree_text, render_tree(tree));
    save_risk_report(dir / artifact::prediction, risk_report(tree));
}

// --- sweeps ----------------------------------------------------------------

ClusteringSweep sweep_clustering(const PipelineConfig& config, std::ostream* log) {
    const auto data = prepare_data(config);
    const auto solver = solver_from_string(config.sweep_solver);
    ClusteringSweep sweep;
    bool elbow_from_cells = false;

    for (auto algorithm : config.sweep_algorithms) {
        for (auto k : config.sweep_k) {
            ClusteringCell cell;
            cell.algorithm = algorithm;
            cell.k = k;
            try {
                const auto model = fit(algorithm, data.points, k, config.fit_options());
                const auto mdp = build_mdp(model, abstract_trajectory(model, data.trajectory.indices), data.labeling,
                                           config.risk, config.gamma);
                const auto policy = solve(solver, mdp, config.gamma, config.solver_options);
                const auto report = evaluate_policy_accuracy(policy, model, data.labeling, config.risk);
                cell.abstract_accuracy = report.abstract_accuracy();
                cell.original_accuracy = report.original_accuracy();
                cell.mse = mean_squared_error(data.points, model);
                cell.ok = true;
                if (algorithm == ClusterAlgorithm::kme)
                    sweep.elbow.push_back({k, cell.mse});
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            if (log)
                *log << "sweep-clustering " << to_string(algorithm) << " k=" << k
                     << (cell.ok ? " original_acc=" + detail::format_double(cell.original_accuracy)
                                 : " failed: " + cell.error)
                     << '\n';
            sweep.cells.push_back(std::move(cell));
        }
        if (algorithm == ClusterAlgorithm::kme)
            elbow_from_cells = true;
    }
    if (!elbow_from_cells)
        sweep.elbow = elbow(data.points, config.sweep_k, config.fit_options());
    return sweep;
}

std::string clustering_csv(const ClusteringSweep& sweep) {
    std::ostringstream out;
    out << "algorithm,k,abstract_acc,original_acc,mse,status\n";
    for (const auto& c : sweep.cells) {
        out << to_string(c.algorithm) << ',' << c.k << ',';
        if (c.ok)
            out << detail::format_double(c.abstract_accuracy) << ',' << detail::format_double(c.original_accuracy)
                << ',' << detail::format_double(c.mse) << ",ok\n";
        else
            out << ",,,failed\n";
    }
    return out.str();
}

std::string elbow_csv(const std::vector<ElbowPoint>& elbow) {
    std::ostringstream out;
    out << "k,mse\n";
    for (const auto& p : elbow)
        out << p.k << ',' << detail::format_double(p.mse) << '\n';
    return out.str();
}

std::vector<GammaRow> sweep_gamma(const PipelineConfig& config, std::ostream* log) {
    const auto data = prepare_data(config);
    const auto model = fit(config.algorithm, data.points, config.k, config.fit_options());
    const auto path = abstract_trajectory(model, data.trajectory.indices);
    std::vector<GammaRow> rows;
    for (double gamma : config.sweep_gammas) {
        const auto mdp = build_mdp(model, path, data.labeling, config.risk, gamma);
        const auto policy = modified_policy_iteration(mdp, gamma, config.solver_options);
        const auto report = evaluate_policy_accuracy(policy, model, data.labeling, config.risk);
        rows.push_back({gamma, report.abstract_accuracy(), report.original_accuracy()});
        if (log)
            *log << "sweep-gamma gamma=" << detail::format_double(gamma)
                 << " original_acc=" << detail::format_double(rows.back().original_accuracy) << '\n';
    }
    return rows;
}

std::string gamma_csv(const std::vector<GammaRow>& rows) {
    std::ostringstream out;
    out << "gamma,abstract_acc,original_acc\n";
    for (const auto& r : rows)
        out << detail::format_double(r.gamma) << ',' << detail::format_double(r.abstract_accuracy) << ','
            << detail::format_double(r.original_accuracy) << '\n';
    return out.str();
}

std::vector<BenchRow> bench_solvers(const PipelineConfig& config, std::ostream* log) {
    const auto data = prepare_data(config);
    const auto model = fit(config.algorithm, data.points, config.k, config.fit_options());
    const auto mdp = build_mdp(model, abstract_trajectory(model, data.trajectory.indices), data.labeling,
                               config.risk, config.gamma);
    auto rows = bench_rows(solve_all(mdp, config.gamma, config.solver_options).policies);
    if (log)
        for (const auto& r : rows)
            *log << "bench-solvers " << to_string(r.solver) << " seconds=" << detail::format_double(r.seconds)
                 << " iterations=" << r.iterations << '\n';
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "solver,seconds,iterations,agrees_with_mpi\n";
    for (const auto& r : rows)
        out << to_string(r.solver) << ',' << detail::format_double(r.seconds) << ',' << r.iterations << ','
            << (r.agrees_with_mpi ? "true" : "false") << '\n';
    return out.str();
}

} // namespace riskmdp
