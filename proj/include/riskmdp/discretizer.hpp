#pragma once

#include "riskmdp/featurestream.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace riskmdp {

inline constexpr std::size_t kFeatureCount = 7;
inline constexpr std::size_t kDosFeature = 6;
inline constexpr int kDosCodes = 8;

/// Equal-width bins over [lower, upper). Codes below range clip to 0, at or
/// above the upper bound to count - 1. A categorical feature ignores the
/// numeric fields and takes its code directly.
struct FeatureBinning {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    double width = 1.0;
    int count = 1;
    bool categorical = false;

    int code(double value) const noexcept;
    bool operator==(const FeatureBinning&) const = default;
};

/// Per-feature binning in record order: six continuous features, then the
/// categorical DoS code.
struct BinningScheme {
    std::vector<FeatureBinning> features;

    /// requests 5, users 5, ratio 4, bytes 4, latency 4, response 4, DoS 8.
    static BinningScheme standard();
    /// Two equal bins per continuous feature over the standard ranges (|S| = 512).
    static BinningScheme binary();

    void validate() const;
    /// Validate and additionally require the seven-feature record layout.
    void validate_record_layout() const;

    std::array<int, kFeatureCount> radices() const;
    bool operator==(const BinningScheme&) const = default;
};

struct DiscreteState {
    std::array<int, kFeatureCount> codes{};

    bool operator==(const DiscreteState&) const = default;
};

inline int dos_code(const DosFlags& flags) noexcept {
    return 4 * int(flags.syn) + 2 * int(flags.udp) + int(flags.icmp);
}

DiscreteState discretize(const FeatureRecord& record, const BinningScheme& scheme);

/// Product of all bin counts.
std::uint64_t state_space_size(const BinningScheme& scheme);

/// Mixed-radix index, first feature most significant.
std::size_t state_index(const DiscreteState& state, const BinningScheme& scheme);
DiscreteState state_from_index(std::size_t index, const BinningScheme& scheme);

/// All states in index order. Throws ConfigError above `max_states`.
std::vector<DiscreteState> enumerate_states(const BinningScheme& scheme, std::size_t max_states = 1u << 24);

/// A discretized observation sequence.
struct DiscreteTrajectory {
    std::vector<DiscreteState> states;
    std::vector<std::size_t> indices;
};

DiscreteTrajectory discretize_all(const std::vector<FeatureRecord>& records, const BinningScheme& scheme);

void save_trajectory(const std::filesystem::path& path, const DiscreteTrajectory& trajectory);
DiscreteTrajectory load_trajectory(const std::filesystem::path& path, const BinningScheme& scheme);

} // namespace riskmdp
