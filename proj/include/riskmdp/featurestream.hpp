#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace riskmdp {

enum class AttackType { syn = 0, udp = 1, icmp = 2 };

std::string to_string(AttackType type);
AttackType attack_type_from_string(const std::string& name);

/// Flood-attack indicators observed during one second.
struct DosFlags {
    bool syn = false;
    bool udp = false;
    bool icmp = false;

    bool any() const noexcept { return syn || udp || icmp; }
    bool operator==(const DosFlags&) const = default;
};

/// One second of subsystem observations.
struct FeatureRecord {
    std::int64_t t = 0;
    double http_requests = 0.0;
    double unique_users = 0.0;
    double req_user_ratio = 0.0;
    double avg_bytes_sent = 0.0;
    double avg_latency = 0.0;       // ms
    double avg_response_time = 0.0; // ms
    DosFlags dos;

    bool operator==(const FeatureRecord&) const = default;
};

/// Requests per user, defined as 0 when no user is active.
double request_user_ratio(double http_requests, double unique_users) noexcept;

/// Throws ValidationError when a record breaks a FeatureRecord invariant.
void validate_record(const FeatureRecord& record, double ratio_tolerance = 1e-9);

struct AttackInterval {
    std::int64_t start = 0; // inclusive
    std::int64_t end = 0;   // exclusive
    AttackType type = AttackType::syn;

    bool contains(std::int64_t t) const noexcept { return t >= start && t < end; }
    bool operator==(const AttackInterval&) const = default;
};

/// Parameters of the synthetic traffic generator. The load level follows an
/// AR(1) process around `mean_users`; everything else is drawn per second
/// from normals clipped to the feature ranges.
struct SimulationConfig {
    std::int64_t duration_steps = 300;
    std::uint64_t seed = 1;
    std::vector<AttackInterval> attack_schedule;

    double mean_users = 15.0;
    double users_stddev = 4.0;
    double load_persistence = 0.8; // AR(1) coefficient of the load level
    double mean_ratio = 2.2;
    double ratio_stddev = 0.6;
    double mean_bytes = 1000.0;
    double bytes_stddev = 90.0;
    double latency_baseline = 600.0;
    double latency_stddev = 250.0;
    double latency_per_request = 12.0;
    double response_baseline = 1800.0;
    double response_stddev = 700.0;
    double response_per_request = 30.0;
    double idle_probability = 0.02;
    double latency_inflation = 3.0;
    double response_inflation = 2.5;

    /// Throws ConfigError on an invalid schedule or parameter.
    void validate() const;
};

/// Attack schedule used by the pipeline when none is configured: one burst of
/// each flood type plus an overlapping syn/udp episode.
std::vector<AttackInterval> default_attack_schedule(std::int64_t duration_steps);

std::vector<FeatureRecord> simulate(const SimulationConfig& config);

std::vector<FeatureRecord> load_records(const std::filesystem::path& path);
std::vector<FeatureRecord> read_records(std::istream& in);

void save_records(const std::filesystem::path& path, const std::vector<FeatureRecord>& records);
void write_records(std::ostream& out, const std::vector<FeatureRecord>& records);

} // namespace riskmdp
