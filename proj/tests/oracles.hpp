#pragma once
// Independent reference implementations used by the unit and acceptance tests.

#include <Eigen/Core>
#include <Eigen/LU>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "riskplan/gp_gripforce.hpp"
#include "test_util.hpp"

namespace testutil {

// Bisection on the tail probability computed with erfc.
inline double bisect_quantile(double p) {
  const bool upper = p > 0.5;
  const double tail = upper ? 1.0 - p : p;
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::numbers::sqrt2) > tail) lo = mid;
    else hi = mid;
  }
  const double x = 0.5 * (lo + hi);
  return upper ? x : -x;
}

inline double se(const Eigen::Vector4d& a, const Eigen::Vector4d& b, double sf, double ell) {
  double d2 = 0.0;
  for (int i = 0; i < 4; ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return sf * sf * std::exp(-d2 / (2.0 * ell * ell));
}

struct DenseOracle {
  std::vector<Eigen::Vector4d> x;
  Eigen::VectorXd y;
  riskplan::gp::Hyperparams hp;
  Eigen::MatrixXd a;

  DenseOracle(const std::vector<riskplan::gp::GripSample>& samples, const riskplan::gp::Hyperparams& h) : hp(h) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x.push_back(samples[static_cast<std::size_t>(i)].state.as_vector());
      y[i] = samples[static_cast<std::size_t>(i)].force;
    }
    a.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) a(i, j) = se(x[i], x[j], hp.sigma_f, hp.ell);
    a.diagonal().array() += hp.sigma_n * hp.sigma_n;
  }

  Eigen::VectorXd weights() const { return a.fullPivLu().solve(y); }

  riskplan::gp::Prediction predict(const Eigen::Vector4d& s) const {
    Eigen::VectorXd k(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) k[i] = se(s, x[static_cast<std::size_t>(i)], hp.sigma_f, hp.ell);
    const Eigen::VectorXd v = a.fullPivLu().solve(k);
    return {k.dot(weights()), hp.sigma_f * hp.sigma_f - k.dot(v)};
  }
};

inline riskplan::gp::GripState random_state(std::mt19937_64& rng) {
  return {uniform(rng, -0.4, 0.4), uniform(rng, -0.4, 0.4), uniform(rng, 0.0, 1.1), uniform(rng, 0.0, 2.5)};
}

inline std::vector<riskplan::gp::GripSample> random_dataset(std::mt19937_64& rng, int n) {
  std::vector<riskplan::gp::GripSample> s;
  for (int i = 0; i < n; ++i) s.push_back({random_state(rng), uniform(rng, 0.0, 60.0)});
  return s;
}

}  // namespace testutil
