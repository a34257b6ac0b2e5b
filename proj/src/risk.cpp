#include "riskplan/risk.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "riskplan/errors.hpp"

namespace riskplan::risk {

std::vector<LinearForceConstraint> friction_cone(const robot::ContactFrame& frame, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidInput("friction_cone: lambda must be >= 0");
  std::vector<LinearForceConstraint> rows;
  rows.reserve(kConeRows);
  rows.push_back({-frame.n, 0.0, 0.0, false});
  for (const Eigen::Vector3d& t : {frame.zeta, Eigen::Vector3d(-frame.zeta), frame.xi, Eigen::Vector3d(-frame.xi)}) {
    rows.push_back({t - lambda * frame.n, 1.0, 0.0, true});
  }
  return rows;
}

RiskBudget allocate(double delta, int rounds, int per_round) {
  if (!(delta >= 0.0 && delta < 1.0)) throw DomainError("allocate: Delta must lie in [0, 1)");
  if (rounds < 1 || per_round < 1) throw DomainError("allocate: N and M must be >= 1");
  if (delta == 0.0) throw ZeroRisk("violation probability is zero; the chance constraints admit no solution");
  return {delta, rounds, per_round, delta / (static_cast<double>(rounds) * per_round)};
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inv_norm_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("inv_norm_cdf: p must lie in (0, 1), got " + std::to_string(p));
  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step. Work in the smaller tail to keep relative precision.
  const double e = x < 0.0 ? norm_cdf(x) - p : (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

DeterministicConstraint reformulate(const LinearForceConstraint& c, double mean_grip, double var_grip,
                                    double delta_jk) {
  if (!c.stochastic) throw InvalidInput("reformulate: constraint is deterministic");
  if (!(var_grip >= 0.0)) throw InvalidInput("reformulate: variance must be >= 0");
  if (delta_jk == 0.0) throw ZeroRisk("per-constraint risk is zero");
  const double z = inv_norm_cdf(1.0 - delta_jk);
  return {c.alpha, c.beta + c.grip_coeff * mean_grip - std::abs(c.grip_coeff) * std::sqrt(var_grip) * z};
}

int count_stochastic(const std::vector<int>& contacts_per_instant) {
  int m = 0;
  for (int c : contacts_per_instant) m += kStochasticConeRows * c;
  return m;
}

}  // namespace riskplan::risk
