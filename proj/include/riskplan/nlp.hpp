#pragma once

// Smooth constrained optimization: min f(x) s.t. h(x) = 0, g(x) <= 0,
// lower <= x <= upper. Solved by a PHR augmented Lagrangian with a projected
// quasi-Newton inner loop.

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace riskplan::nlp {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Output of one problem evaluation. Derivative members are only read when
/// they were requested.
struct Evaluation {
  double objective = 0.0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd eq;    ///< h(x)
  Eigen::VectorXd ineq;  ///< g(x), feasible when <= 0
  SparseMatrix eq_jac;   ///< n_eq x n_vars
  SparseMatrix ineq_jac; ///< n_ineq x n_vars
};

struct NlpProblem {
  int n_vars = 0;
  int n_eq = 0;
  int n_ineq = 0;
  Eigen::VectorXd lower;  ///< may hold -inf
  Eigen::VectorXd upper;  ///< may hold +inf
  Eigen::VectorXd x0;
  /// Must be reentrant. The bool requests gradient and Jacobians.
  std::function<void(const Eigen::VectorXd&, bool, Evaluation&)> evaluate;

  /// Checks shapes, bounds and finiteness at x0. Throws InvalidInput.
  void validate() const;
};

enum class Status { Converged, Infeasible, IterLimit };
const char* to_string(Status s);

struct SolverOptions {
  double tol_feas = 1e-6;   ///< on max(|h|inf, |max(g,0)|inf), physical units
  double tol_kkt = 1e-4;    ///< on the projected Lagrangian gradient, scaled space
  int max_outer = 50;
  int max_inner = 500;
  double rho0 = 10.0;
  double rho_growth = 10.0;
  double rho_max = 1e8;
  double initial_curvature = 0.1;  ///< inner model Hessian starts at this multiple of I
  double objective_scale = 1.0;
  Eigen::VectorXd x_scale;     ///< x = x_scale .* y; empty means ones
  Eigen::VectorXd eq_scale;    ///< scaled h = h ./ eq_scale
  Eigen::VectorXd ineq_scale;  ///< scaled g = g ./ ineq_scale
  bool record_merit = false;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double feasibility = 0.0;
  double kkt = 0.0;
};

struct SolveReport {
  Status status = Status::IterLimit;
  std::string message;
  Eigen::VectorXd x;
  double objective = 0.0;
  double eq_residual = 0.0;     ///< max |h|
  double ineq_violation = 0.0;  ///< max max(g, 0)
  double kkt = 0.0;
  double complementarity = 0.0; ///< max |mu_k g_k|, physical units
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double wall_time_s = 0.0;
  std::vector<IterationRecord> history;
  /// Augmented Lagrangian values at accepted inner steps, one list per outer
  /// iteration (only with record_merit).
  std::vector<std::vector<double>> merit_traces;

  double feasibility() const { return std::max(eq_residual, ineq_violation); }
};

SolveReport solve(const NlpProblem& problem, const SolverOptions& options = {});

/// Writes `iter,obj,feas,kkt` rows.
void write_iteration_log(std::ostream& out, const SolveReport& report);

struct DerivativeCheck {
  double max_error = 0.0;  ///< max |a - b| / max(1, |a|, |b|)
  std::string where;       ///< location of the worst entry
};

/// Compares supplied derivatives with central differences of step h.
DerivativeCheck check_derivatives(const NlpProblem& problem, const Eigen::VectorXd& x, double h = 1e-6);

}  // namespace riskplan::nlp
