#pragma once

#include "riskmdp/discretizer.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace riskmdp {

/// Dense row-major point set.
class PointMatrix {
public:
    PointMatrix() = default;
    PointMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}
    PointMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<double> row(std::size_t i) noexcept { return {values_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {values_.data() + i * cols_, cols_}; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * cols_ + j]; }

    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// Every state of the scheme as a 7-dimensional vector of its integer codes,
/// in state-index order.
PointMatrix state_points(const BinningScheme& scheme);

std::size_t count_distinct_rows(const PointMatrix& points);

enum class ClusterAlgorithm { kme, kmm, gmm };

std::string to_string(ClusterAlgorithm algorithm);
ClusterAlgorithm cluster_algorithm_from_string(const std::string& name);

/// Abstraction of the original state space into `k` abstract states.
struct ClusterModel {
    ClusterAlgorithm algorithm = ClusterAlgorithm::kme;
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<std::vector<double>> centroids;          // k x dim; GMM means
    std::vector<std::vector<double>> inverse_covariance; // KMM only, dim x dim
    std::vector<double> weights;                         // GMM only, sums to 1
    std::vector<std::vector<double>> variances;          // GMM only, diagonal covariances
    std::vector<std::uint32_t> assignment;               // original state -> abstract id

    /// Abstract id of an original state; throws std::out_of_range.
    std::size_t map_state(std::size_t state_index) const;
    std::vector<std::size_t> cluster_sizes() const;
    /// Members of each abstract state, ascending.
    std::vector<std::vector<std::size_t>> members() const;

    bool operator==(const ClusterModel&) const = default;
};

struct FitOptions {
    std::uint64_t seed = 1;
    std::size_t max_iterations = 300;     // k-means
    std::size_t gmm_max_iterations = 100;
    double gmm_tolerance = 1e-6;          // mean per-point log-likelihood gain
    double gmm_variance_floor = 1e-6;
};

/// Per-iteration diagnostics of a fit. For k-means `objective` holds the
/// within-cluster sum of squared distances after each update step; for GMM
/// it holds the mean per-point log-likelihood evaluated at each E-step.
struct FitTrace {
    std::vector<double> objective;
    /// GMM: indices i such that components were re-seeded between objective[i-1] and objective[i].
    std::vector<std::size_t> reinit_iterations;
    std::size_t reinitialized_components = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

ClusterModel fit_kme(const PointMatrix& points, std::size_t k, const FitOptions& options, FitTrace* trace = nullptr);

/// k-means under the Mahalanobis metric of the (ridge-regularized) sample
/// covariance of all points.
ClusterModel fit_kmm(const PointMatrix& points, std::size_t k, const FitOptions& options, FitTrace* trace = nullptr);

/// Diagonal-covariance Gaussian mixture fitted by EM from k-means++ means.
ClusterModel fit_gmm(const PointMatrix& points, std::size_t k, const FitOptions& options, FitTrace* trace = nullptr);

ClusterModel fit(ClusterAlgorithm algorithm, const PointMatrix& points, std::size_t k, const FitOptions& options,
                 FitTrace* trace = nullptr);

/// Mean squared Euclidean distance from each point to its assigned centroid.
double mean_squared_error(const PointMatrix& points, const ClusterModel& model);

struct ElbowPoint {
    std::size_t k = 0;
    double mse = 0.0;
};

std::vector<ElbowPoint> elbow(const PointMatrix& points, const std::vector<std::size_t>& k_values,
                              const FitOptions& options);

} // namespace riskmdp
