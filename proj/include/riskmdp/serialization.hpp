#pragma once

// JSON and CSV persistence for every artifact the pipeline writes.

#include "riskmdp/abstraction.hpp"
#include "riskmdp/discretizer.hpp"
#include "riskmdp/errors.hpp"
#include "riskmdp/featurestream.hpp"
#include "riskmdp/mdpbuild.hpp"
#include "riskmdp/policyeval.hpp"
#include "riskmdp/predictor.hpp"
#include "riskmdp/solvers.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace riskmdp {

using json = nlohmann::json;

void to_json(json& j, const AttackInterval& v);
void from_json(const json& j, AttackInterval& v);
void to_json(json& j, const SimulationConfig& v);
void from_json(const json& j, SimulationConfig& v);

void to_json(json& j, const FeatureBinning& v);
void from_json(const json& j, FeatureBinning& v);
void to_json(json& j, const BinningScheme& v);
void from_json(const json& j, BinningScheme& v);

void to_json(json& j, const ClusterModel& v);
void from_json(const json& j, ClusterModel& v);

void to_json(json& j, const RiskParams& v);
void from_json(const json& j, RiskParams& v);

void to_json(json& j, const Policy& v);
void from_json(const json& j, Policy& v);

void to_json(json& j, const AccuracyCounts& v);
void from_json(const json& j, AccuracyCounts& v);
void to_json(json& j, const AccuracyReport& v);
void from_json(const json& j, AccuracyReport& v);

void to_json(json& j, const PredictionParams& v);
void from_json(const json& j, PredictionParams& v);
void to_json(json& j, const PredictionTree& v);
void from_json(const json& j, PredictionTree& v);

/// Transitions inline as nested arrays.
json mdp_to_json(const MdpModel& mdp);
MdpModel mdp_from_json(const json& j, const std::filesystem::path& base_dir = {});

/// Writes `path`; with `sidecar` the two transition matrices go to
/// `<path>.bin` (per matrix: uint32 rows, uint32 cols, then row-major
/// little-endian float64) and the JSON names that file.
void save_mdp(const std::filesystem::path& path, const MdpModel& mdp, bool sidecar);
MdpModel load_mdp(const std::filesystem::path& path);

void write_transition_sidecar(std::ostream& out, const MdpModel& mdp);
void read_transition_sidecar(std::istream& in, MdpModel& mdp);

json load_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void save_json(const std::filesystem::path& path, const json& value);

template <class T>
T load_artifact(const std::filesystem::path& path) {
    const auto j = load_json(path);
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

template <class T>
void save_artifact(const std::filesystem::path& path, const T& value) {
    save_json(path, json(value));
}

std::string accuracy_csv_header();
std::string accuracy_csv_row(const AccuracyReport& report);

void save_risk_report(const std::filesystem::path& path, const std::vector<RiskForecast>& report);
std::vector<RiskForecast> load_risk_report(const std::filesystem::path& path);

} // namespace riskmdp
