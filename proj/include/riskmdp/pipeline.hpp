#pragma once

#include "riskmdp/abstraction.hpp"
#include "riskmdp/discretizer.hpp"
#include "riskmdp/featurestream.hpp"
#include "riskmdp/mdpbuild.hpp"
#include "riskmdp/policyeval.hpp"
#include "riskmdp/predictor.hpp"
#include "riskmdp/serialization.hpp"
#include "riskmdp/solvers.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace riskmdp {

/// File names inside the output directory.
namespace artifact {
inline constexpr const char* records = "records.csv";
inline constexpr const char* scheme = "scheme.json";
inline constexpr const char* trajectory = "trajectory.csv";
inline constexpr const char* cluster_model = "cluster_model.json";
inline constexpr const char* elbow = "elbow.csv";
inline constexpr const char* mdp = "mdp.json";
inline constexpr const char* policy = "policy.json";
inline constexpr const char* solver_report = "solver_report.csv";
inline constexpr const char* accuracy = "accuracy.json";
inline constexpr const char* accuracy_csv = "accuracy.csv";
inline constexpr const char* tree = "prediction_tree.json";
inline constexpr const char* tree_text = "prediction_tree.txt";
inline constexpr const char* prediction = "prediction_report.csv";
inline constexpr const char* config = "config.json";
inline constexpr const char* partial = ".partial";
inline constexpr const char* sweep_clustering = "sweep_clustering.csv";
inline constexpr const char* sweep_elbow = "sweep_elbow.csv";
inline constexpr const char* sweep_gamma = "sweep_gamma.csv";
inline constexpr const char* bench_solvers = "bench_solvers.csv";

std::string policy_file(SolverKind kind);
} // namespace artifact

struct PipelineConfig {
    /// Records CSV to ingest; empty means simulate.
    std::filesystem::path records_in;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 1;

    SimulationConfig simulation; // its seed is replaced by `seed`
    BinningScheme scheme = BinningScheme::standard();

    ClusterAlgorithm algorithm = ClusterAlgorithm::kme;
    std::size_t k = 1000;
    FitOptions fit; // its seed is replaced by `seed`

    RiskParams risk;
    double gamma = 0.1;
    /// A solver tag, or "all" to run every solver (MPI then supplies policy.json).
    std::string solver = "MPI";
    SolverOptions solver_options;

    PredictionParams prediction;
    std::optional<std::size_t> root;

    bool transition_sidecar = true;

    // sweep drivers
    std::vector<ClusterAlgorithm> sweep_algorithms{ClusterAlgorithm::kme, ClusterAlgorithm::kmm,
                                                   ClusterAlgorithm::gmm};
    std::vector<std::size_t> sweep_k{250, 500, 750, 1000};
    std::string sweep_solver = "PI";
    std::vector<double> sweep_gammas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

    PipelineConfig();

    void validate() const;
    SimulationConfig simulation_config() const;
    FitOptions fit_options() const;
};

void to_json(json& j, const PipelineConfig& v);
void from_json(const json& j, PipelineConfig& v);

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Observations, their discretization and the risk labels of every original state.
struct PreparedData {
    std::vector<FeatureRecord> records;
    DiscreteTrajectory trajectory;
    RiskLabeling labeling;
    PointMatrix points;
};

PreparedData prepare_data(const PipelineConfig& config);

/// Default root: abstract state of the last trajectory step that is not risky.
std::size_t select_root(const std::vector<std::size_t>& abstract_path, const std::vector<std::uint8_t>& abstract_risky);

struct PipelineResult {
    PreparedData data;
    ClusterModel model;
    std::vector<std::size_t> abstract_path;
    MdpModel mdp;
    std::vector<Policy> policies;
    Policy policy; // the one evaluated and used for prediction
    AccuracyReport accuracy;
    std::vector<std::uint8_t> abstract_risky;
    std::size_t root = 0;
    PredictionTree tree;
    std::vector<RiskForecast> forecast;
};

/// simulate/load -> discretize -> abstract -> build -> solve -> evaluate ->
/// predict. Writes every artifact under config.out_dir; on failure leaves a
/// `.partial` marker naming the failed stage and rethrows.
PipelineResult run_pipeline(const PipelineConfig& config, std::ostream* log = nullptr);

std::string summary_line(const PipelineResult& result);

// Single stages reading and writing artifacts in config.out_dir.
void run_simulate_stage(const PipelineConfig& config);
void run_discretize_stage(const PipelineConfig& config);
void run_abstract_stage(const PipelineConfig& config, bool with_elbow);
void run_build_stage(const PipelineConfig& config);
void run_solve_stage(const PipelineConfig& config);
void run_evaluate_stage(const PipelineConfig& config);
void run_predict_stage(const PipelineConfig& config);

struct ClusteringCell {
    ClusterAlgorithm algorithm = ClusterAlgorithm::kme;
    std::size_t k = 0;
    bool ok = false;
    std::string error;
    double abstract_accuracy = 0.0;
    double original_accuracy = 0.0;
    double mse = 0.0;
};

struct ClusteringSweep {
    std::vector<ClusteringCell> cells; // algorithm-major, in configured order
    std::vector<ElbowPoint> elbow;     // KME
};

ClusteringSweep sweep_clustering(const PipelineConfig& config, std::ostream* log = nullptr);
std::string clustering_csv(const ClusteringSweep& sweep);
std::string elbow_csv(const std::vector<ElbowPoint>& elbow);

struct GammaRow {
    double gamma = 0.0;
    double abstract_accuracy = 0.0;
    double original_accuracy = 0.0;
};

std::vector<GammaRow> sweep_gamma(const PipelineConfig& config, std::ostream* log = nullptr);
std::string gamma_csv(const std::vector<GammaRow>& rows);

struct BenchRow {
    SolverKind solver = SolverKind::value_iteration;
    double seconds = 0.0;
    std::size_t iterations = 0;
    bool agrees_with_mpi = false;
};

std::vector<BenchRow> bench_solvers(const PipelineConfig& config, std::ostream* log = nullptr);
std::string bench_csv(const std::vector<BenchRow>& rows);

} // namespace riskmdp
