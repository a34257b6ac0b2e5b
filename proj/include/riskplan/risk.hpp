#pragma once

// Friction cones with a stochastic gripping-force offset, uniform risk
// allocation and the Gaussian reformulation of chance constraints.

#include <Eigen/Core>
#include <vector>

#include "riskplan/robot_model.hpp"

namespace riskplan::risk {

/// alpha . f - grip_coeff * f_grip <= beta, with f_grip the random maximum
/// gripping force.
struct LinearForceConstraint {
  Eigen::Vector3d alpha = Eigen::Vector3d::Zero();
  double grip_coeff = 0.0;
  double beta = 0.0;
  bool stochastic = false;

  /// Value of the left-hand side minus beta for a given gripping force.
  double residual(const Eigen::Vector3d& f, double f_grip) const { return alpha.dot(f) - grip_coeff * f_grip - beta; }
};

/// Five rows: (c0) -n.f <= 0 and (c1..c4) +zeta, -zeta, +xi, -xi shear rows
/// s.f - lambda n.f - f_grip <= 0.
std::vector<LinearForceConstraint> friction_cone(const robot::ContactFrame& frame, double lambda);

inline constexpr int kConeRows = 5;
inline constexpr int kStochasticConeRows = 4;

struct RiskBudget {
  double delta = 0.0;
  int rounds = 1;
  int per_round = 1;
  double delta_jk = 0.0;
};

/// Delta_jk = Delta / (N M). Throws ZeroRisk for Delta = 0 and DomainError
/// outside [0, 1) or for N, M < 1.
RiskBudget allocate(double delta, int rounds, int per_round);

/// Standard normal CDF via erfc.
double norm_cdf(double x);
/// Standard normal quantile. Throws DomainError outside (0, 1).
double inv_norm_cdf(double p);

/// Deterministic margin form of a stochastic row: alpha . f <= beta + rhs_offset.
struct DeterministicConstraint {
  Eigen::Vector3d alpha = Eigen::Vector3d::Zero();
  double rhs = 0.0;

  double residual(const Eigen::Vector3d& f) const { return alpha.dot(f) - rhs; }
};

/// alpha . f - grip_coeff mean + |grip_coeff| sqrt(var) Phi^-1(1 - Delta_jk) <= beta.
/// Throws ZeroRisk when delta_jk = 0 and DomainError when outside (0, 1).
DeterministicConstraint reformulate(const LinearForceConstraint& c, double mean_grip, double var_grip,
                                    double delta_jk);

/// Stochastic rows per round: 4 per contact per instant.
/// `contacts_per_instant` lists the number of contacts at each instant of a round.
int count_stochastic(const std::vector<int>& contacts_per_instant);

}  // namespace riskplan::risk
