#include "riskplan/gp_gripforce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "riskplan/errors.hpp"

namespace riskplan::gp {

void GripState::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma)) {
    throw InvalidInput("GripState: angles must be finite");
  }
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw InvalidInput("GripState: lambda must be finite and >= 0");
  }
}

void Hyperparams::validate() const {
  if (!(sigma_f > 0.0) || !(ell > 0.0) || !(sigma_n >= 0.0) || !std::isfinite(sigma_f) ||
      !std::isfinite(ell) || !std::isfinite(sigma_n)) {
    throw InvalidInput("Hyperparams: need sigma_f > 0, ell > 0, sigma_n >= 0");
  }
  if (!(dim_scale.array() > 0.0).all()) {
    throw InvalidInput("Hyperparams: dimension scales must be positive");
  }
}

namespace {

double scaled_sq_distance(const Eigen::Vector4d& a, const Eigen::Vector4d& b, const Hyperparams& hp) {
  const Eigen::Vector4d d = (a - b).cwiseQuotient(hp.dim_scale) / hp.ell;
  return d.squaredNorm();
}

Eigen::MatrixXd covariance(const Eigen::Matrix<double, Eigen::Dynamic, 4>& x, const Hyperparams& hp) {
  const Eigen::Index n = x.rows();
  const double amp = hp.sigma_f * hp.sigma_f;
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = amp + hp.sigma_n * hp.sigma_n;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = amp * std::exp(-0.5 * scaled_sq_distance(x.row(i).transpose(), x.row(j).transpose(), hp));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

// Smallest Cholesky pivot relative to the prior amplitude; anything below this
// is numerically indistinguishable from a singular covariance.
constexpr double kPivotFloor = 1e-13;

bool factor_ok(const Eigen::LLT<Eigen::MatrixXd>& llt, double amp) {
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
  const double min_pivot = diag.minCoeff();
  return std::isfinite(min_pivot) && min_pivot * min_pivot > kPivotFloor * amp;
}

std::string describe_duplicates(const Eigen::Matrix<double, Eigen::Dynamic, 4>& x) {
  std::ostringstream out;
  int reported = 0;
  for (Eigen::Index i = 0; i < x.rows() && reported < 5; ++i) {
    for (Eigen::Index j = i + 1; j < x.rows() && reported < 5; ++j) {
      if ((x.row(i) - x.row(j)).cwiseAbs().maxCoeff() == 0.0) {
        out << (reported ? ", " : "") << "(" << i << "," << j << ")";
        ++reported;
      }
    }
  }
  return out.str();
}

Eigen::Matrix<double, Eigen::Dynamic, 4> stack_states(std::span<const GripSample> samples) {
  Eigen::Matrix<double, Eigen::Dynamic, 4> x(static_cast<Eigen::Index>(samples.size()), 4);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = samples[i].state.as_vector().transpose();
  }
  return x;
}

Eigen::VectorXd stack_targets(std::span<const GripSample> samples) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) y[static_cast<Eigen::Index>(i)] = samples[i].force;
  return y;
}

double lml_from(const Eigen::Matrix<double, Eigen::Dynamic, 4>& x, const Eigen::VectorXd& y,
                const Hyperparams& hp) {
  const Eigen::LLT<Eigen::MatrixXd> llt(covariance(x, hp));
  if (!factor_ok(llt, hp.sigma_f * hp.sigma_f)) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(y);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * y.dot(alpha) - 0.5 * log_det -
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

// BFGS ascent on the log marginal likelihood over log-hyperparameters.
Hyperparams optimize_hyperparams(const Eigen::Matrix<double, Eigen::Dynamic, 4>& x,
                                 const Eigen::VectorXd& y, const Hyperparams& hp0) {
  const bool fit_noise = hp0.sigma_n > 0.0;
  const int dim = fit_noise ? 3 : 2;
  const Eigen::Vector3d lo(std::log(1e-3), std::log(1e-3), std::log(1e-6 * hp0.sigma_f));
  const Eigen::Vector3d hi(std::log(1e5), std::log(1e3), std::log(1e4));

  auto unpack = [&](const Eigen::VectorXd& p) {
    Hyperparams hp = hp0;
    hp.sigma_f = std::exp(p[0]);
    hp.ell = std::exp(p[1]);
    if (fit_noise) hp.sigma_n = std::exp(p[2]);
    return hp;
  };
  auto clamp = [&](Eigen::VectorXd p) {
    for (int i = 0; i < dim; ++i) p[i] = std::clamp(p[i], lo[i], hi[i]);
    return p;
  };
  auto cost = [&](const Eigen::VectorXd& p) { return -lml_from(x, y, unpack(p)); };
  auto gradient = [&](const Eigen::VectorXd& p) {
    constexpr double h = 1e-5;
    Eigen::VectorXd g(dim);
    for (int i = 0; i < dim; ++i) {
      Eigen::VectorXd a = p, b = p;
      a[i] += h;
      b[i] -= h;
      g[i] = (cost(a) - cost(b)) / (2.0 * h);
    }
    return g;
  };

  Eigen::VectorXd p(dim);
  p[0] = std::log(hp0.sigma_f);
  p[1] = std::log(hp0.ell);
  if (fit_noise) p[2] = std::log(hp0.sigma_n);
  p = clamp(p);

  double f = cost(p);
  if (!std::isfinite(f)) return hp0;
  Eigen::VectorXd g = gradient(p);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(dim, dim);

  for (int iter = 0; iter < 200; ++iter) {
    if (!g.allFinite() || g.lpNorm<Eigen::Infinity>() < 1e-6 * (1.0 + std::abs(f))) break;
    Eigen::VectorXd dir = -h_inv * g;
    if (dir.dot(g) >= 0.0) {
      h_inv.setIdentity();
      dir = -g;
    }
    // Steps are capped at a factor e in every hyperparameter.
    double step = std::min(1.0, 1.0 / dir.lpNorm<Eigen::Infinity>());
    Eigen::VectorXd p_new;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      p_new = clamp(p + step * dir);
      f_new = cost(p_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(p_new - p)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd g_new = gradient(p_new);
    const Eigen::VectorXd s = p_new - p;
    const Eigen::VectorXd yk = g_new - g;
    const double sy = s.dot(yk);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
      h_inv = (eye - rho * s * yk.transpose()) * h_inv * (eye - rho * yk * s.transpose()) +
              rho * s * s.transpose();
    }
    const double improvement = f - f_new;
    p = p_new;
    f = f_new;
    g = g_new;
    if (s.lpNorm<Eigen::Infinity>() < 1e-9 || improvement < 1e-12 * (1.0 + std::abs(f))) break;
  }
  return unpack(p);
}

}  // namespace

double kernel(const GripState& a, const GripState& b, const Hyperparams& hp) {
  return hp.sigma_f * hp.sigma_f * std::exp(-0.5 * scaled_sq_distance(a.as_vector(), b.as_vector(), hp));
}

Hyperparams default_hyperparams(std::span<const GripSample> samples) {
  if (samples.empty()) throw InvalidInput("default_hyperparams: empty dataset");
  Hyperparams hp;
  double mean = 0.0;
  for (const auto& s : samples) mean += s.force;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (const auto& s : samples) var += (s.force - mean) * (s.force - mean);
  var /= static_cast<double>(samples.size());
  hp.sigma_f = var > 0.0 ? std::sqrt(var) : 1.0;

  std::vector<double> dists;
  dists.reserve(samples.size() * (samples.size() - 1) / 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      const double d = (samples[i].state.as_vector() - samples[j].state.as_vector()).norm();
      if (d > 0.0) dists.push_back(d);
    }
  }
  if (!dists.empty()) {
    const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    hp.ell = *mid;
  }
  hp.sigma_n = 0.05 * hp.sigma_f;
  return hp;
}

double log_marginal_likelihood(std::span<const GripSample> samples, const Hyperparams& hp) {
  hp.validate();
  return lml_from(stack_states(samples), stack_targets(samples), hp);
}

GPModel GPModel::fit(std::span<const GripSample> samples, const Hyperparams& hp0, bool optimize) {
  if (samples.empty()) throw InvalidInput("GPModel::fit: need at least one sample");
  hp0.validate();
  for (const auto& s : samples) {
    s.state.validate();
    if (!std::isfinite(s.force) || s.force < 0.0) throw InvalidInput("GPModel::fit: forces must be >= 0");
  }
  GPModel model;
  model.states_ = stack_states(samples);
  model.targets_ = stack_targets(samples);
  model.hp_ = optimize ? optimize_hyperparams(model.states_, model.targets_, hp0) : hp0;
  model.factorize();
  return model;
}

void GPModel::factorize() {
  const double amp = hp_.sigma_f * hp_.sigma_f;
  if (hp_.sigma_n == 0.0) {
    const std::string dups = describe_duplicates(states_);
    if (!dups.empty()) throw SingularKernel("GP covariance singular: duplicate states " + dups);
  }
  llt_.compute(covariance(states_, hp_));
  if (!factor_ok(llt_, amp)) {
    const std::string dups = describe_duplicates(states_);
    throw SingularKernel("GP covariance not positive definite" +
                         (dups.empty() ? std::string() : ": duplicate states " + dups));
  }
  weights_ = llt_.solve(targets_);
  const double log_det = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  log_likelihood_ = -0.5 * targets_.dot(weights_) - 0.5 * log_det -
                    0.5 * static_cast<double>(targets_.size()) * std::log(2.0 * std::numbers::pi);
}

Prediction GPModel::predict(const GripState& s) const {
  const Eigen::Vector4d q = s.as_vector();
  const double amp = hp_.sigma_f * hp_.sigma_f;
  Eigen::VectorXd k(states_.rows());
  for (Eigen::Index i = 0; i < states_.rows(); ++i) {
    k[i] = amp * std::exp(-0.5 * scaled_sq_distance(states_.row(i).transpose(), q, hp_));
  }
  const Eigen::VectorXd v = llt_.matrixL().solve(k);
  return {k.dot(weights_), std::max(0.0, amp - v.squaredNorm())};
}

PredictionGradient GPModel::predict_with_gradient(const GripState& s) const {
  const Eigen::Vector4d q = s.as_vector();
  const double amp = hp_.sigma_f * hp_.sigma_f;
  const Eigen::Index n = states_.rows();
  const Eigen::Vector4d inv_len2 = (hp_.dim_scale * hp_.ell).array().square().inverse();

  Eigen::VectorXd k(n);
  Eigen::Matrix<double, Eigen::Dynamic, 4> dk(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector4d xi = states_.row(i).transpose();
    k[i] = amp * std::exp(-0.5 * scaled_sq_distance(xi, q, hp_));
    dk.row(i) = (k[i] * (xi - q).cwiseProduct(inv_len2)).transpose();
  }
  const Eigen::VectorXd alpha = llt_.solve(k);

  PredictionGradient out;
  out.mean = k.dot(weights_);
  out.d_mean = dk.transpose() * weights_;
  const double var = amp - k.dot(alpha);
  if (var > 0.0) {
    out.variance = var;
    out.d_variance = -2.0 * (dk.transpose() * alpha);
  }
  return out;
}

nlohmann::json GPModel::to_json() const {
  nlohmann::json doc;
  doc["hyperparams"] = {{"sigma_f", hp_.sigma_f},
                        {"ell", hp_.ell},
                        {"sigma_n", hp_.sigma_n},
                        {"dim_scale", {hp_.dim_scale[0], hp_.dim_scale[1], hp_.dim_scale[2], hp_.dim_scale[3]}}};
  nlohmann::json states = nlohmann::json::array();
  for (Eigen::Index i = 0; i < states_.rows(); ++i) {
    states.push_back({states_(i, 0), states_(i, 1), states_(i, 2), states_(i, 3)});
  }
  doc["states_rad"] = std::move(states);
  doc["targets_n"] = std::vector<double>(targets_.data(), targets_.data() + targets_.size());
  doc["log_marginal_likelihood"] = log_likelihood_;
  doc["generator"] = generator ? generator->parameters : nlohmann::json(nullptr);
  return doc;
}

GPModel GPModel::from_json(const nlohmann::json& doc) {
  try {
    Hyperparams hp;
    const auto& h = doc.at("hyperparams");
    hp.sigma_f = h.at("sigma_f").get<double>();
    hp.ell = h.at("ell").get<double>();
    hp.sigma_n = h.at("sigma_n").get<double>();
    if (h.contains("dim_scale")) {
      const auto scale = h.at("dim_scale").get<std::vector<double>>();
      if (scale.size() != 4) throw InvalidInput("GP model JSON: dim_scale must have 4 entries");
      hp.dim_scale = Eigen::Vector4d(scale[0], scale[1], scale[2], scale[3]);
    }
    const auto& states = doc.at("states_rad");
    const auto targets = doc.at("targets_n").get<std::vector<double>>();
    if (states.size() != targets.size()) throw InvalidInput("GP model JSON: states/targets size mismatch");
    std::vector<GripSample> samples(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const auto v = states.at(i).get<std::vector<double>>();
      if (v.size() != 4) throw InvalidInput("GP model JSON: each state needs 4 entries");
      samples[i] = {{v[0], v[1], v[2], v[3]}, targets[i]};
    }
    GPModel model = fit(samples, hp, false);
    if (doc.contains("generator") && !doc.at("generator").is_null()) {
      model.generator = GeneratorInfo{doc.at("generator")};
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("GP model JSON: ") + e.what());
  }
}

}  // namespace riskplan::gp
