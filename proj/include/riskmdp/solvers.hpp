#pragma once

#include "riskmdp/mdpbuild.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace riskmdp {

enum class SolverKind {
    value_iteration,
    policy_iteration,
    modified_policy_iteration,
    relative_value_iteration,
    gauss_seidel_value_iteration,
};

inline constexpr std::array<SolverKind, 5> kAllSolvers{
    SolverKind::value_iteration, SolverKind::policy_iteration, SolverKind::modified_policy_iteration,
    SolverKind::relative_value_iteration, SolverKind::gauss_seidel_value_iteration};

/// "VI", "PI", "MPI", "RVI", "GS-VI".
std::string to_string(SolverKind kind);
SolverKind solver_from_string(const std::string& name);
bool is_discounted(SolverKind kind) noexcept;

struct SolverOptions {
    double epsilon = 1e-8;
    std::size_t mpi_sweeps = 10;
    std::size_t max_iterations = 100000;
    std::size_t policy_iteration_cap = 10000;
    /// RVI stops here when the relative values never settle (multichain models).
    std::size_t rvi_max_iterations = 1000;
    /// Self-loop weight of the aperiodicity transform used by RVI.
    double rvi_aperiodicity = 0.5;
    std::size_t rvi_reference_state = 0;
};

struct Policy {
    SolverKind solver = SolverKind::value_iteration;
    double gamma = 0.0;
    std::vector<int> actions;
    /// Discounted values, or relative values for RVI.
    std::vector<double> values;
    double gain = 0.0; // RVI only
    std::size_t iterations = 0;
    double seconds = 0.0;
    bool converged = false;
    /// Optimality residual of `values` measured after the solve: the
    /// discounted Bellman residual, or for RVI the average-reward residual
    /// max_s |h(s) + g - max_a[R + P h](s)|.
    double residual = 0.0;
};

/// Q(s, a) = R(s, a) + gamma * sum_s' P(s'|s, a) V(s').
Eigen::Matrix<double, Eigen::Dynamic, kActionCount> q_values(const MdpModel& mdp, const Vector& values, double gamma);

/// Greedy actions; action 1 only when strictly better than action 0.
std::vector<int> greedy_actions(const Eigen::Matrix<double, Eigen::Dynamic, kActionCount>& q);

/// max_s |V(s) - max_a[R(s,a) + gamma sum P V](s)|
double bellman_residual(const MdpModel& mdp, const std::vector<double>& values, double gamma);
double relative_bellman_residual(const MdpModel& mdp, const std::vector<double>& values, double gain);

/// Exact discounted value of a fixed policy via (I - gamma P_pi) V = R_pi.
Vector evaluate_policy(const MdpModel& mdp, const std::vector<int>& actions, double gamma);

Policy value_iteration(const MdpModel& mdp, double gamma, const SolverOptions& options = {});
Policy policy_iteration(const MdpModel& mdp, double gamma, const SolverOptions& options = {});
Policy modified_policy_iteration(const MdpModel& mdp, double gamma, const SolverOptions& options = {});
Policy relative_value_iteration(const MdpModel& mdp, const SolverOptions& options = {});
Policy gauss_seidel_vi(const MdpModel& mdp, double gamma, const SolverOptions& options = {});

Policy solve(SolverKind kind, const MdpModel& mdp, double gamma, const SolverOptions& options = {});

struct SolverComparison {
    std::vector<Policy> policies; // in kAllSolvers order
    /// agreement[i][j]: identical action vectors.
    std::vector<std::vector<bool>> agreement;

    const Policy& get(SolverKind kind) const;
};

SolverComparison solve_all(const MdpModel& mdp, double gamma, const SolverOptions& options = {});

} // namespace riskmdp
