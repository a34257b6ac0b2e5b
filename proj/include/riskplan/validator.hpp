#pragma once

// Independent constraint audit of planned trajectories and Monte-Carlo
// certification of their violation probability.

#include <cstdint>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "riskplan/gp_gripforce.hpp"
#include "riskplan/planner.hpp"

namespace riskplan::validator {

struct AuditFinding {
  std::string family;
  int instant = -1;  ///< -1 for foothold-level findings
  int limb = -1;
  double value = 0.0;  ///< amount by which the constraint is violated
};

struct AuditReport {
  double force_residual = 0.0;    ///< N
  double moment_residual = 0.0;   ///< N m
  double fk_residual = 0.0;       ///< m
  double min_cone_margin = 0.0;   ///< N, reformulated rows
  double min_torque_margin = 0.0; ///< N m
  double region_violation = 0.0;  ///< m
  double plane_residual = 0.0;    ///< m
  double stride_violation = 0.0;  ///< m or rad
  double swing_force = 0.0;       ///< N
  std::vector<AuditFinding> findings;  ///< entries above the tolerance

  /// Largest violation over every family.
  double max_violation() const;
  nlohmann::json to_json() const;
};

/// Re-evaluates every constraint of the plan with homogeneous-transform
/// kinematics and finite-difference Jacobians. Violations above `tol` are
/// listed in the findings.
AuditReport audit(const planner::Trajectory& traj, const planner::PlanProblem& problem, double tol = 1e-6);

struct ConstraintRate {
  std::string id;
  int round = 0;
  int instant = 0;
  int limb = 0;
  int row = 0;  ///< 1..4: +zeta, -zeta, +xi, -xi
  std::int64_t violations = 0;
  double rate = 0.0;
  double half_width = 0.0;  ///< 99% confidence
  double delta_jk = 0.0;
};

struct RiskReport {
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<ConstraintRate> constraints;
  std::int64_t joint_violations = 0;
  double joint_rate = 0.0;
  double joint_half_width = 0.0;
  double sum_of_rates = 0.0;
  double delta = 0.0;
  double delta_jk = 0.0;

  nlohmann::json to_json() const;
  /// `constraint_id,round,limb,rate,delta_jk`.
  void write_csv(std::ostream& out) const;
};

/// Samples the gripping force of every contact from the GP at the planned
/// gripper state and evaluates the original shear rows. Deterministic for a
/// given seed and sample count regardless of `threads` (0 = hardware).
RiskReport certify(const planner::Trajectory& traj, const gp::GPModel& model, std::int64_t samples,
                   std::uint64_t seed, int threads = 0);

/// 99% Wald half-width of a binomial rate.
double wald_half_width(double rate, std::int64_t samples);

}  // namespace riskplan::validator
