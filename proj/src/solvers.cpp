#include "riskmdp/solvers.hpp"

#include "riskmdp/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace riskmdp {

namespace {

using QMatrix = Eigen::Matrix<double, Eigen::Dynamic, kActionCount>;

void check_discount(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw ConfigError("discounted solvers need gamma in (0, 1)");
}

double stopping_threshold(double epsilon, double gamma) {
    if (!(epsilon > 0.0))
        throw ConfigError("epsilon must be positive");
    return epsilon * (1.0 - gamma) / (2.0 * gamma);
}

std::vector<double> to_std(const Vector& v) {
    return {v.data(), v.data() + v.size()};
}

Vector max_over_actions(const QMatrix& q) {
    return q.rowwise().maxCoeff();
}

double span(const Vector& v) {
    return v.size() == 0 ? 0.0 : v.maxCoeff() - v.minCoeff();
}

Policy finish(SolverKind kind, const MdpModel& mdp, double gamma, const Vector& values, std::size_t iterations,
              bool converged) {
    Policy p;
    p.solver = kind;
    p.gamma = gamma;
    p.actions = greedy_actions(q_values(mdp, values, gamma));
    p.values = to_std(values);
    p.iterations = iterations;
    p.converged = converged;
    p.residual = bellman_residual(mdp, p.values, gamma);
    return p;
}

template <class Solve>
Policy timed(Solve&& solve) {
    const auto start = std::chrono::steady_clock::now();
    Policy p = solve();
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    // clock granularity floor
    p.seconds = std::max(elapsed.count(), 1e-9);
    return p;
}

} // namespace

std::string to_string(SolverKind kind) {
    switch (kind) {
    case SolverKind::value_iteration:
        return "VI";
    case SolverKind::policy_iteration:
        return "PI";
    case SolverKind::modified_policy_iteration:
        return "MPI";
    case SolverKind::relative_value_iteration:
        return "RVI";
    case SolverKind::gauss_seidel_value_iteration:
        return "GS-VI";
    }
    return "unknown";
}

SolverKind solver_from_string(const std::string& name) {
    for (auto kind : kAllSolvers)
        if (to_string(kind) == name)
            return kind;
    if (name == "GSVI")
        return SolverKind::gauss_seidel_value_iteration;
    throw ConfigError("unknown solver '" + name + "'");
}

bool is_discounted(SolverKind kind) noexcept {
    return kind != SolverKind::relative_value_iteration;
}

QMatrix q_values(const MdpModel& mdp, const Vector& values, double gamma) {
    QMatrix q(static_cast<Eigen::Index>(mdp.k), kActionCount);
    for (int a = 0; a < kActionCount; ++a)
        q.col(a) = mdp.reward.col(a) + gamma * (mdp.transition[static_cast<std::size_t>(a)] * values);
    return q;
}

std::vector<int> greedy_actions(const QMatrix& q) {
    std::vector<int> actions(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index s = 0; s < q.rows(); ++s)
        actions[static_cast<std::size_t>(s)] = q(s, kJump) > q(s, kRemain) ? kJump : kRemain;
    return actions;
}

double bellman_residual(const MdpModel& mdp, const std::vector<double>& values, double gamma) {
    const Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (static_cast<std::size_t>(v.size()) != mdp.k)
        throw ConfigError("value vector length does not match the model");
    return (max_over_actions(q_values(mdp, v, gamma)) - v).cwiseAbs().maxCoeff();
}

double relative_bellman_residual(const MdpModel& mdp, const std::vector<double>& values, double gain) {
    const Vector h = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (static_cast<std::size_t>(h.size()) != mdp.k)
        throw ConfigError("value vector length does not match the model");
    const Vector backup = max_over_actions(q_values(mdp, h, 1.0));
    return (h.array() + gain - backup.array()).abs().maxCoeff();
}

Vector evaluate_policy(const MdpModel& mdp, const std::vector<int>& actions, double gamma) {
    const auto n = static_cast<Eigen::Index>(mdp.k);
    if (actions.size() != mdp.k)
        throw ConfigError("policy length does not match the model");
    Matrix system = Matrix::Identity(n, n);
    Vector rhs(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const int a = actions[static_cast<std::size_t>(s)];
        system.row(s) -= gamma * mdp.transition[static_cast<std::size_t>(a)].row(s);
        rhs(s) = mdp.reward(s, a);
    }
    Eigen::PartialPivLU<Matrix> lu(system);
    Vector v = lu.solve(rhs);
    const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
    if (!v.allFinite() || (system * v - rhs).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw NumericError("policy evaluation system is singular");
    return v;
}

Policy value_iteration(const MdpModel& mdp, double gamma, const SolverOptions& options) {
    check_discount(gamma);
    mdp.validate();
    const double threshold = stopping_threshold(options.epsilon, gamma);
    Vector v = Vector::Zero(static_cast<Eigen::Index>(mdp.k));
    std::size_t it = 0;
    bool converged = false;
    while (it < options.max_iterations) {
        Vector next = max_over_actions(q_values(mdp, v, gamma));
        const double change = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        ++it;
        if (change < threshold) {
            converged = true;
            break;
        }
    }
    return finish(SolverKind::value_iteration, mdp, gamma, v, it, converged);
}

Policy policy_iteration(const MdpModel& mdp, double gamma, const SolverOptions& options) {
    check_discount(gamma);
    mdp.validate();
    auto actions = greedy_actions(q_values(mdp, Vector::Zero(static_cast<Eigen::Index>(mdp.k)), gamma));
    Vector v;
    std::size_t it = 0;
    bool converged = false;
    while (it < options.policy_iteration_cap) {
        v = evaluate_policy(mdp, actions, gamma);
        ++it;
        const QMatrix q = q_values(mdp, v, gamma);
        // Switch only on a clear improvement so rounding noise cannot cycle.
        bool changed = false;
        for (Eigen::Index s = 0; s < q.rows(); ++s) {
            auto& a = actions[static_cast<std::size_t>(s)];
            const int other = 1 - a;
            const double margin = 1e-12 * (1.0 + std::abs(q(s, a)));
            if (q(s, other) > q(s, a) + margin) {
                a = other;
                changed = true;
            }
        }
        if (!changed) {
            converged = true;
            break;
        }
    }
    Policy p = finish(SolverKind::policy_iteration, mdp, gamma, v, it, converged);
    if (p.actions != actions) {
        p.values = to_std(evaluate_policy(mdp, p.actions, gamma));
        p.residual = bellman_residual(mdp, p.values, gamma);
    }
    return p;
}

Policy modified_policy_iteration(const MdpModel& mdp, double gamma, const SolverOptions& options) {
    check_discount(gamma);
    mdp.validate();
    if (options.mpi_sweeps < 1)
        throw ConfigError("modified policy iteration needs at least one evaluation sweep");
    const double threshold = stopping_threshold(options.epsilon, gamma);
    const auto n = static_cast<Eigen::Index>(mdp.k);

    Vector v = Vector::Zero(n);
    Matrix p_pi(n, n);
    Vector r_pi(n);
    std::size_t it = 0;
    bool converged = false;
    while (it < options.max_iterations) {
        const QMatrix q = q_values(mdp, v, gamma);
        const auto actions = greedy_actions(q);
        Vector next = max_over_actions(q);
        const double change = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        ++it;
        if (change < threshold) {
            converged = true;
            break;
        }
        for (Eigen::Index s = 0; s < n; ++s) {
            const int a = actions[static_cast<std::size_t>(s)];
            p_pi.row(s) = mdp.transition[static_cast<std::size_t>(a)].row(s);
            r_pi(s) = mdp.reward(s, a);
        }
        // partial evaluation of the greedy policy
        for (std::size_t sweep = 1; sweep < options.mpi_sweeps; ++sweep)
            v = r_pi + gamma * (p_pi * v);
    }
    return finish(SolverKind::modified_policy_iteration, mdp, gamma, v, it, converged);
}

Policy relative_value_iteration(const MdpModel& mdp, const SolverOptions& options) {
    mdp.validate();
    const auto n = static_cast<Eigen::Index>(mdp.k);
    const auto ref = static_cast<Eigen::Index>(options.rvi_reference_state);
    if (ref >= n)
        throw ConfigError("RVI reference state out of range");
    const double tau = options.rvi_aperiodicity;
    if (!(tau >= 0.0 && tau < 1.0))
        throw ConfigError("RVI aperiodicity weight must lie in [0, 1)");

    // Iterates on P' = tau I + (1 - tau) P, which shares gains and optimal
    // policies with P; relative values of P are (1 - tau) times those of P'.
    Vector h = Vector::Zero(n);
    double gain = 0.0;
    std::size_t it = 0;
    bool converged = false;
    while (it < options.rvi_max_iterations) {
        const Vector backup = tau * h + max_over_actions(q_values(mdp, h, 1.0 - tau));
        gain = backup(ref);
        Vector next = backup.array() - gain;
        const double change = span(next - h);
        h = std::move(next);
        ++it;
        if (change < options.epsilon) {
            converged = true;
            break;
        }
    }

    const Vector relative = (1.0 - tau) * h;
    Policy p;
    p.solver = SolverKind::relative_value_iteration;
    p.gamma = 1.0;
    p.actions = greedy_actions(q_values(mdp, relative, 1.0));
    p.values = to_std(relative);
    p.gain = gain;
    p.iterations = it;
    p.converged = converged;
    p.residual = relative_bellman_residual(mdp, p.values, gain);
    return p;
}

Policy gauss_seidel_vi(const MdpModel& mdp, double gamma, const SolverOptions& options) {
    check_discount(gamma);
    mdp.validate();
    const double threshold = stopping_threshold(options.epsilon, gamma);
    const auto n = static_cast<Eigen::Index>(mdp.k);
    const auto& p0 = mdp.transition[kRemain];
    const auto& p1 = mdp.transition[kJump];

    Vector v = Vector::Zero(n);
    std::size_t it = 0;
    bool converged = false;
    while (it < options.max_iterations) {
        double change = 0.0;
        for (Eigen::Index s = 0; s < n; ++s) {
            const double q0 = mdp.reward(s, kRemain) + gamma * p0.row(s).dot(v);
            const double q1 = mdp.reward(s, kJump) + gamma * p1.row(s).dot(v);
            const double best = std::max(q0, q1);
            change = std::max(change, std::abs(best - v(s)));
            v(s) = best;
        }
        ++it;
        if (change < threshold) {
            converged = true;
            break;
        }
    }
    return finish(SolverKind::gauss_seidel_value_iteration, mdp, gamma, v, it, converged);
}

Policy solve(SolverKind kind, const MdpModel& mdp, double gamma, const SolverOptions& options) {
    return timed([&] {
        switch (kind) {
        case SolverKind::value_iteration:
            return value_iteration(mdp, gamma, options);
        case SolverKind::policy_iteration:
            return policy_iteration(mdp, gamma, options);
        case SolverKind::modified_policy_iteration:
            return modified_policy_iteration(mdp, gamma, options);
        case SolverKind::relative_value_iteration:
            return relative_value_iteration(mdp, options);
        case SolverKind::gauss_seidel_value_iteration:
            return gauss_seidel_vi(mdp, gamma, options);
        }
        throw ConfigError("unknown solver");
    });
}

const Policy& SolverComparison::get(SolverKind kind) const {
    for (const auto& p : policies)
        if (p.solver == kind)
            return p;
    throw ConfigError("solver " + to_string(kind) + " missing from comparison");
}

SolverComparison solve_all(const MdpModel& mdp, double gamma, const SolverOptions& options) {
    SolverComparison out;
    for (auto kind : kAllSolvers)
        out.policies.push_back(solve(kind, mdp, gamma, options));
    const auto n = out.policies.size();
    out.agreement.assign(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.agreement[i][j] = out.policies[i].actions == out.policies[j].actions;
    return out;
}

} // namespace riskmdp
