#pragma once

// Gaussian Process regression of the maximum gripping shear force as a
// function of gripper orientation and surface friction coefficient.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <vector>

namespace riskplan::gp {

/// Gripper state s = [alpha, beta, gamma, lambda]; angles in radians.
struct GripState {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;

  Eigen::Vector4d as_vector() const { return {alpha, beta, gamma, lambda}; }
  static GripState from_vector(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }
  void validate() const;
};

/// One pull test: gripper state and the measured maximum shear force (N).
struct GripSample {
  GripState state;
  double force = 0.0;
};

struct Hyperparams {
  double sigma_f = 1.0;  ///< amplitude (N)
  double ell = 1.0;      ///< length scale in state-space units
  double sigma_n = 0.0;  ///< observation noise std (N)
  /// Optional per-dimension length-scale multipliers. All ones gives the
  /// equally weighted Euclidean metric.
  Eigen::Vector4d dim_scale = Eigen::Vector4d::Ones();

  void validate() const;
};

/// Squared exponential kernel sigma_f^2 exp(-|a-b|^2 / (2 ell^2)).
double kernel(const GripState& a, const GripState& b, const Hyperparams& hp);

/// Starting point for hyperparameter fitting: sigma_f = std of targets,
/// ell = median pairwise state distance, sigma_n = 0.05 sigma_f.
Hyperparams default_hyperparams(std::span<const GripSample> samples);

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;  ///< latent-function variance (N^2)
};

struct PredictionGradient {
  double mean = 0.0;
  double variance = 0.0;
  Eigen::Vector4d d_mean = Eigen::Vector4d::Zero();
  Eigen::Vector4d d_variance = Eigen::Vector4d::Zero();
};

/// Provenance of a synthetic training set, carried through model export.
struct GeneratorInfo {
  nlohmann::json parameters;
};

/// Fitted GP. Immutable after construction, so concurrent predictions are safe.
class GPModel {
 public:
  /// Fits the model. With `optimize` set, hyperparameters maximize the log
  /// marginal likelihood by BFGS ascent from `hp0` using numeric gradients.
  /// Throws SingularKernel when (K + sigma_n^2 I) cannot be factorized.
  static GPModel fit(std::span<const GripSample> samples, const Hyperparams& hp0, bool optimize);

  Prediction predict(const GripState& s) const;
  PredictionGradient predict_with_gradient(const GripState& s) const;

  double log_marginal_likelihood() const { return log_likelihood_; }
  const Hyperparams& hyperparams() const { return hp_; }
  double noise_variance() const { return hp_.sigma_n * hp_.sigma_n; }
  std::size_t size() const { return static_cast<std::size_t>(targets_.size()); }
  const Eigen::Matrix<double, Eigen::Dynamic, 4>& states() const { return states_; }
  const Eigen::VectorXd& targets() const { return targets_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  std::optional<GeneratorInfo> generator;

  nlohmann::json to_json() const;
  static GPModel from_json(const nlohmann::json& doc);

 private:
  GPModel() = default;
  void factorize();

  Hyperparams hp_;
  Eigen::Matrix<double, Eigen::Dynamic, 4> states_;
  Eigen::VectorXd targets_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd weights_;
  double log_likelihood_ = 0.0;
};

/// Log marginal likelihood of a dataset under fixed hyperparameters.
/// Returns -infinity when the covariance is not positive definite.
double log_marginal_likelihood(std::span<const GripSample> samples, const Hyperparams& hp);

}  // namespace riskplan::gp
