#include "riskmdp/abstraction.hpp"

#include "riskmdp/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace riskmdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative slack on Hamerly bounds so that floating-point drift never lets a
// point skip a search whose exact outcome would be a tie.
constexpr double kBoundSlack = 1e-10;

inline double squared_distance(const double* a, const double* b, std::size_t d) noexcept {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

/// k-means++ seeding. Each new centre consumes exactly one uniform draw, so
/// the first m centres for a given seed do not depend on k.
PointMatrix seed_plus_plus(const PointMatrix& x, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    PointMatrix centers(k, d);
    auto pick_uniform = [&] {
        return std::min(n - 1, static_cast<std::size_t>(uniform(rng) * static_cast<double>(n)));
    };
    auto set_center = [&](std::size_t c, std::size_t i) { std::ranges::copy(x.row(i), centers.row(c).begin()); };

    set_center(0, pick_uniform());
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i)
        nearest[i] = squared_distance(x.row(i).data(), centers.row(0).data(), d);

    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
        const double u = uniform(rng);
        std::size_t chosen = n;
        if (total > 0.0) {
            const double target = u * total;
            double cumulative = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (nearest[i] <= 0.0)
                    continue;
                chosen = i;
                cumulative += nearest[i];
                if (cumulative > target)
                    break;
            }
        } else {
            chosen = std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)));
        }
        set_center(c, chosen);
        const double* cp = centers.row(c).data();
        for (std::size_t i = 0; i < n; ++i)
            nearest[i] = std::min(nearest[i], squared_distance(x.row(i).data(), cp, d));
    }
    return centers;
}

struct LloydState {
    PointMatrix centers;
    std::vector<std::uint32_t> assignment;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Recompute centroids as member means. Empty clusters keep their centre.
void update_centers(const PointMatrix& x, const std::vector<std::uint32_t>& assignment, PointMatrix& centers) {
    const std::size_t k = centers.rows();
    const std::size_t d = centers.cols();
    PointMatrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto a = assignment[i];
        ++counts[a];
        auto row = x.row(i);
        for (std::size_t j = 0; j < d; ++j)
            sums(a, j) += row[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0)
            continue;
        for (std::size_t j = 0; j < d; ++j)
            centers(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
}

double within_cluster_ss(const PointMatrix& x, const PointMatrix& centers, const std::vector<std::uint32_t>& assignment) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        total += squared_distance(x.row(i).data(), centers.row(assignment[i]).data(), x.cols());
    return total;
}

/// Lloyd's algorithm with Hamerly's bounds. Produces the same assignments as
/// plain Lloyd iterations: nearest centre under squared Euclidean distance,
/// ties to the lowest id, checked by a full pass before declaring a fixpoint.
LloydState lloyd(const PointMatrix& x, PointMatrix centers, std::size_t max_iterations, FitTrace* trace) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const std::size_t k = centers.rows();

    LloydState state;
    state.assignment.assign(n, 0);
    std::vector<double> upper(n), lower(n);

    // Full search: returns whether the assignment changed and resets bounds.
    auto full_search = [&](std::size_t i) {
        const double* xi = x.row(i).data();
        double best = kInf, second = kInf;
        std::uint32_t best_id = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double dist = squared_distance(xi, centers.row(c).data(), d);
            if (dist < best) {
                second = best;
                best = dist;
                best_id = static_cast<std::uint32_t>(c);
            } else if (dist < second) {
                second = dist;
            }
        }
        const bool changed = best_id != state.assignment[i];
        state.assignment[i] = best_id;
        upper[i] = std::sqrt(best);
        lower[i] = std::sqrt(second);
        return changed;
    };

    auto record = [&] {
        if (trace)
            trace->objective.push_back(within_cluster_ss(x, centers, state.assignment));
    };

    for (std::size_t i = 0; i < n; ++i)
        full_search(i);
    // bounds refer to `previous`; shifts are measured against it
    PointMatrix previous = centers;
    update_centers(x, state.assignment, centers);
    state.iterations = 1;
    record();

    std::vector<double> shift(k, 0.0), half_gap(k, kInf);

    while (state.iterations < max_iterations) {
        // Bound maintenance for the centre movement of the last update.
        double max_shift = 0.0, second_shift = 0.0;
        std::size_t max_id = 0;
        for (std::size_t c = 0; c < k; ++c) {
            shift[c] = std::sqrt(squared_distance(previous.row(c).data(), centers.row(c).data(), d));
            if (shift[c] > max_shift) {
                second_shift = max_shift;
                max_shift = shift[c];
                max_id = c;
            } else if (shift[c] > second_shift) {
                second_shift = shift[c];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = state.assignment[i];
            upper[i] += shift[a];
            lower[i] -= (a == max_id) ? second_shift : max_shift;
        }
        for (std::size_t c = 0; c < k; ++c) {
            double nearest = kInf;
            for (std::size_t o = 0; o < k; ++o)
                if (o != c)
                    nearest = std::min(nearest, squared_distance(centers.row(c).data(), centers.row(o).data(), d));
            half_gap[c] = 0.5 * std::sqrt(nearest);
        }

        std::size_t changed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = state.assignment[i];
            const double bound = std::max(half_gap[a], lower[i]);
            if (upper[i] * (1.0 + kBoundSlack) < bound)
                continue;
            upper[i] = std::sqrt(squared_distance(x.row(i).data(), centers.row(a).data(), d));
            if (upper[i] * (1.0 + kBoundSlack) < bound)
                continue;
            changed += full_search(i);
        }
        if (changed == 0) {
            for (std::size_t i = 0; i < n; ++i)
                changed += full_search(i);
            if (changed == 0) {
                state.converged = true;
                break;
            }
        }

        previous = centers;
        update_centers(x, state.assignment, centers);
        ++state.iterations;
        record();
    }

    state.centers = std::move(centers);
    if (trace) {
        trace->iterations = state.iterations;
        trace->converged = state.converged;
    }
    return state;
}

void check_cluster_count(const PointMatrix& points, std::size_t k) {
    if (k == 0)
        throw ConfigError("cluster count must be at least 1");
    if (points.rows() == 0)
        throw ConfigError("cannot cluster an empty point set");
    const auto distinct = count_distinct_rows(points);
    if (k > distinct)
        throw ConfigError("cluster count " + std::to_string(k) + " exceeds the " + std::to_string(distinct) +
                          " distinct points");
}

std::vector<std::vector<double>> to_nested(const PointMatrix& m) {
    std::vector<std::vector<double>> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        out[i].assign(m.row(i).begin(), m.row(i).end());
    return out;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::VectorXd column_means(const PointMatrix& x) {
    Eigen::Map<const RowMatrix> m(x.values().data(), static_cast<Eigen::Index>(x.rows()),
                                  static_cast<Eigen::Index>(x.cols()));
    return m.colwise().mean().transpose();
}

} // namespace

PointMatrix::PointMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_)
        throw ConfigError("point matrix size mismatch");
}

PointMatrix state_points(const BinningScheme& scheme) {
    const auto states = enumerate_states(scheme);
    PointMatrix points(states.size(), kFeatureCount);
    for (std::size_t i = 0; i < states.size(); ++i)
        for (std::size_t j = 0; j < kFeatureCount; ++j)
            points(i, j) = static_cast<double>(states[i].codes[j]);
    return points;
}

std::size_t count_distinct_rows(const PointMatrix& points) {
    if (points.rows() == 0)
        return 0;
    std::vector<std::size_t> order(points.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
        return std::ranges::lexicographical_compare(points.row(a), points.row(b));
    };
    std::ranges::sort(order, less);
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < order.size(); ++i)
        if (!std::ranges::equal(points.row(order[i - 1]), points.row(order[i])))
            ++distinct;
    return distinct;
}

std::string to_string(ClusterAlgorithm algorithm) {
    switch (algorithm) {
    case ClusterAlgorithm::kme:
        return "KME";
    case ClusterAlgorithm::kmm:
        return "KMM";
    case ClusterAlgorithm::gmm:
        return "GMM";
    }
    return "unknown";
}

ClusterAlgorithm cluster_algorithm_from_string(const std::string& name) {
    std::string upper = name;
    std::ranges::transform(upper, upper.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper == "KME")
        return ClusterAlgorithm::kme;
    if (upper == "KMM")
        return ClusterAlgorithm::kmm;
    if (upper == "GMM")
        return ClusterAlgorithm::gmm;
    throw ConfigError("unknown clustering algorithm '" + name + "'");
}

std::size_t ClusterModel::map_state(std::size_t state_index) const {
    if (state_index >= assignment.size())
        throw std::out_of_range("state index " + std::to_string(state_index) + " outside the clustered space");
    return assignment[state_index];
}

std::vector<std::size_t> ClusterModel::cluster_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignment)
        ++sizes[a];
    return sizes;
}

std::vector<std::vector<std::size_t>> ClusterModel::members() const {
    std::vector<std::vector<std::size_t>> out(k);
    for (std::size_t s = 0; s < assignment.size(); ++s)
        out[assignment[s]].push_back(s);
    return out;
}

ClusterModel fit_kme(const PointMatrix& points, std::size_t k, const FitOptions& options, FitTrace* trace) {
    check_cluster_count(points, k);
    std::mt19937_64 rng(options.seed);
    auto state = lloyd(points, seed_plus_plus(points, k, rng), std::max<std::size_t>(1, options.max_iterations), trace);

    ClusterModel model;
    model.algorithm = ClusterAlgorithm::kme;
    model.k = k;
    model.dim = points.cols();
    model.centroids = to_nested(state.centers);
    model.assignment = std::move(state.assignment);
    return model;
}

ClusterModel fit_kmm(const PointMatrix& points, std::size_t k, const FitOptions& options, FitTrace* trace) {
    check_cluster_count(points, k);
    const auto n = static_cast<Eigen::Index>(points.rows());
    const auto d = static_cast<Eigen::Index>(points.cols());

    Eigen::Map<const RowMatrix> x(points.values().data(), n, d);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const RowMatrix centered = x.rowwise() - mean;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
    const double ridge = 1e-6 * cov.diagonal().mean();
    cov.diagonal().array() += ridge;

    // Mahalanobis distance under cov = L L^T is Euclidean distance after x -> L^{-1} x.
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success || !(ridge > 0.0))
        throw NumericError("sample covariance is singular after regularization");
    const Eigen::MatrixXd lower = llt.matrixL();
    RowMatrix whitened = llt.matrixL().solve(x.transpose()).transpose();

    PointMatrix white(points.rows(), points.cols(),
                      std::vector<double>(whitened.data(), whitened.data() + whitened.size()));
    std::mt19937_64 rng(options.seed);
    auto state = lloyd(white, seed_plus_plus(white, k, rng), std::max<std::size_t>(1, options.max_iterations), trace);

    ClusterModel model;
    model.algorithm = ClusterAlgorithm::kmm;
    model.k = k;
    model.dim = points.cols();
    model.centroids.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        Eigen::Map<const Eigen::VectorXd> cw(state.centers.row(c).data(), d);
        const Eigen::VectorXd original = lower * cw;
        model.centroids[c].assign(original.data(), original.data() + d);
    }
    const Eigen::MatrixXd inverse = llt.solve(Eigen::MatrixXd::Identity(d, d));
    model.inverse_covariance.resize(static_cast<std::size_t>(d));
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            model.inverse_covariance[static_cast<std::size_t>(r)].push_back(inverse(r, c));
    model.assignment = std::move(state.assignment);
    return model;
}

ClusterModel fit_gmm(const PointMatrix& points, std::size_t k, const FitOptions& options, FitTrace* trace) {
    if (k == 0)
        throw ConfigError("cluster count must be at least 1");
    if (points.rows() == 0)
        throw ConfigError("cannot cluster an empty point set");

    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const double floor = options.gmm_variance_floor;
    // Responsibilities below exp(-kCutoff) of the best component are dropped.
    constexpr double kCutoff = 50.0;
    constexpr double kDegenerateMass = 1e-10;

    std::mt19937_64 rng(options.seed);
    PointMatrix means = seed_plus_plus(points, k, rng);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const Eigen::VectorXd global_mean = column_means(points);
    std::vector<double> global_var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = points(i, j) - global_mean[static_cast<Eigen::Index>(j)];
            global_var[j] += diff * diff;
        }
    for (auto& v : global_var)
        v = std::max(v / static_cast<double>(n), floor);

    PointMatrix variances(k, d);
    for (std::size_t c = 0; c < k; ++c)
        std::ranges::copy(global_var, variances.row(c).begin());
    std::vector<double> weights(k, 1.0 / static_cast<double>(k));

    std::vector<std::uint32_t> assignment(n, 0);
    std::vector<double> log_prob(k), norm_const(k), log_weight(k);
    PointMatrix inv_var(k, d);
    PointMatrix sum_x(k, d), sum_xx(k, d);
    std::vector<double> mass(k);

    double previous_ll = -kInf;
    std::size_t iteration = 0;
    bool converged = false;
    bool reseeded = false;
    const std::size_t max_iterations = std::max<std::size_t>(1, options.gmm_max_iterations);

    while (true) {
        // E-step with sufficient statistics accumulated on the fly.
        for (std::size_t c = 0; c < k; ++c) {
            double log_det = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                inv_var(c, j) = 1.0 / variances(c, j);
                log_det += std::log(2.0 * std::numbers::pi * variances(c, j));
            }
            norm_const[c] = -0.5 * log_det;
            log_weight[c] = weights[c] > 0.0 ? std::log(weights[c]) : -kInf;
        }
        std::ranges::fill(mass, 0.0);
        sum_x = PointMatrix(k, d);
        sum_xx = PointMatrix(k, d);
        double total_ll = 0.0;

        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = points.row(i).data();
            double best = -kInf;
            std::uint32_t best_id = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double* mu = means.row(c).data();
                const double* iv = inv_var.row(c).data();
                double q = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = xi[j] - mu[j];
                    q += diff * diff * iv[j];
                }
                const double lp = log_weight[c] + norm_const[c] - 0.5 * q;
                log_prob[c] = lp;
                if (lp > best) {
                    best = lp;
                    best_id = static_cast<std::uint32_t>(c);
                }
            }
            assignment[i] = best_id;
            double sum = 0.0;
            for (std::size_t c = 0; c < k; ++c)
                if (log_prob[c] - best > -kCutoff)
                    sum += std::exp(log_prob[c] - best);
            const double ll = best + std::log(sum);
            total_ll += ll;
            for (std::size_t c = 0; c < k; ++c) {
                if (log_prob[c] - best <= -kCutoff)
                    continue;
                const double r = std::exp(log_prob[c] - ll);
                mass[c] += r;
                for (std::size_t j = 0; j < d; ++j) {
                    sum_x(c, j) += r * xi[j];
                    sum_xx(c, j) += r * xi[j] * xi[j];
                }
            }
        }

        const double mean_ll = total_ll / static_cast<double>(n);
        if (trace) {
            trace->objective.push_back(mean_ll);
            if (reseeded)
                trace->reinit_iterations.push_back(trace->objective.size() - 1);
        }
        ++iteration;
        if (iteration > 1 && !reseeded && mean_ll - previous_ll < options.gmm_tolerance) {
            converged = true;
            break;
        }
        if (iteration >= max_iterations)
            break;
        previous_ll = mean_ll;
        reseeded = false;

        // M-step.
        for (std::size_t c = 0; c < k; ++c) {
            if (mass[c] <= kDegenerateMass) {
                const auto i = std::min(n - 1, static_cast<std::size_t>(uniform(rng) * static_cast<double>(n)));
                std::ranges::copy(points.row(i), means.row(c).begin());
                std::ranges::copy(global_var, variances.row(c).begin());
                weights[c] = 1.0 / static_cast<double>(n);
                reseeded = true;
                if (trace)
                    ++trace->reinitialized_components;
                std::clog << "gmm: component " << c << " lost all responsibility mass at iteration " << iteration
                          << "; re-seeded from point " << i << '\n';
                continue;
            }
            weights[c] = mass[c] / static_cast<double>(n);
            for (std::size_t j = 0; j < d; ++j) {
                const double mu = sum_x(c, j) / mass[c];
                means(c, j) = mu;
                variances(c, j) = std::max(sum_xx(c, j) / mass[c] - mu * mu, floor);
            }
        }
        const double weight_total = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (auto& w : weights)
            w /= weight_total;
    }

    if (trace) {
        trace->iterations = iteration;
        trace->converged = converged;
    }

    ClusterModel model;
    model.algorithm = ClusterAlgorithm::gmm;
    model.k = k;
    model.dim = d;
    model.centroids = to_nested(means);
    model.weights = std::move(weights);
    model.variances = to_nested(variances);
    model.assignment = std::move(assignment);
    return model;
}

ClusterModel fit(ClusterAlgorithm algorithm, const PointMatrix& points, std::size_t k, const FitOptions& options,
                 FitTrace* trace) {
    switch (algorithm) {
    case ClusterAlgorithm::kme:
        return fit_kme(points, k, options, trace);
    case ClusterAlgorithm::kmm:
        return fit_kmm(points, k, options, trace);
    case ClusterAlgorithm::gmm:
        return fit_gmm(points, k, options, trace);
    }
    throw ConfigError("unknown clustering algorithm");
}

double mean_squared_error(const PointMatrix& points, const ClusterModel& model) {
    if (model.assignment.size() != points.rows())
        throw ConfigError("cluster model does not match the point set");
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i)
        total += squared_distance(points.row(i).data(), model.centroids[model.assignment[i]].data(), points.cols());
    return total / static_cast<double>(points.rows());
}

std::vector<ElbowPoint> elbow(const PointMatrix& points, const std::vector<std::size_t>& k_values,
                              const FitOptions& options) {
    std::vector<ElbowPoint> curve;
    curve.reserve(k_values.size());
    for (auto k : k_values) {
        const auto model = fit_kme(points, k, options);
        curve.push_back({k, mean_squared_error(points, model)});
    }
    return curve;
}

} // namespace riskmdp
