#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "ccs/numeric.hpp"

namespace ccs {

// Dense NLP
//   min cost(x)  s.t.  equality(x) = 0,  inequality(x) >= 0,  lb <= x <= ub.
//
// gradient / equality_jacobian / inequality_jacobian are optional; when unset
// the solver falls back to dense central differences with fd_step. Infinite
// bounds mean unbounded. equality_blocks names the residual blocks for
// diagnostics.
struct NlpProblem {
  std::function<double(const Eigen::VectorXd&)> cost;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> equality;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> inequality;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> equality_jacobian;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> inequality_jacobian;
  Eigen::VectorXd lb, ub;
  double fd_step = 1e-6;
  std::vector<std::pair<std::string, int>> equality_blocks;

  int n() const { return static_cast<int>(lb.size()); }
  int n_equalities(const Eigen::VectorXd& x) const;
  int n_inequalities(const Eigen::VectorXd& x) const;

  Eigen::VectorXd cost_gradient(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd eq_jacobian(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd ineq_jacobian(const Eigen::VectorXd& x) const;
};

struct SolverConfig {
  int max_outer = 40;
  int max_inner = 250;
  double eq_tol = 1e-6;
  double ineq_tol = 1e-8;
  double stat_tol = 1e-4;
  double rho0 = 10.0;
  double rho_growth = 10.0;
  double rho_max = 1e9;
  double armijo = 1e-4;
  int max_linesearch = 40;
  bool verbose = false;
};

enum class SolveStatus { converged, max_iterations, line_search_failure };

std::string to_string(SolveStatus s);

struct IterationRecord {
  int iteration = 0;
  double merit = 0.0;
  double feasibility = 0.0;
  double step_length = 0.0;
};

struct NlpSolution {
  Eigen::VectorXd x;
  SolveStatus status = SolveStatus::max_iterations;
  int iterations = 0;        // inner iterations, total
  int outer_iterations = 0;
  double cost = 0.0;
  double kkt_stationarity = 0.0;
  double kkt_equality = 0.0;    // infinity norm of the equality residual
  double kkt_inequality = 0.0;  // infinity norm of the inequality violation
  double wall_time_s = 0.0;
  Eigen::VectorXd multipliers_eq;
  Eigen::VectorXd multipliers_ineq;
  std::vector<IterationRecord> log;
  // decision indices violating their bounds at the initial guess (reported,
  // never clipped)
  std::vector<int> initial_bound_violations;

  bool converged() const { return status == SolveStatus::converged; }
};

// Augmented-Lagrangian method with damped quasi-Newton inner iterations and
// an Armijo backtracking line search. Bounds are folded into the inequality
// set with exact unit Jacobian rows.
NlpSolution solve_nlp(const NlpProblem& problem, const Eigen::VectorXd& x0,
                      const SolverConfig& cfg = {});

}  // namespace ccs
