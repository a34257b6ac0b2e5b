#pragma once

// Pull-test datasets: CSV ingestion/emission and the synthetic generator used
// in place of hardware measurements.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <vector>

#include "riskplan/gp_gripforce.hpp"

namespace riskplan::gp {

/// Header of the dataset CSV; angles in degrees, converted to radians on load.
inline constexpr const char* kDatasetHeader = "alpha_deg,beta_deg,gamma_deg,mu,force_n";

std::vector<GripSample> read_dataset(std::istream& in);
std::vector<GripSample> read_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const std::vector<GripSample>& samples);
void write_dataset(const std::filesystem::path& path, const std::vector<GripSample>& samples);

/// Cartesian grid of pull-test orientations (degrees) and friction values.
struct OrientationGrid {
  std::vector<double> alpha_deg;
  std::vector<double> beta_deg;
  std::vector<double> gamma_deg;
  std::vector<double> lambda;

  /// Training orientations: alpha, beta in {-15, 0, 15} deg, gamma in
  /// {0, 30, 60} deg, lambda in {1.1, 2.3}.
  static OrientationGrid training();
  std::size_t size() const;
  void validate() const;
};

/// Ground truth m(s) = c0 lambda (1 + c1 cos(alpha) cos(beta)) (1 + c2 cos(gamma))
/// plus Gaussian noise, clamped at zero.
struct SyntheticGripGenerator {
  double c0 = 9.0;
  double c1 = 0.5;
  double c2 = 0.5;
  double noise_std = 10.0;  ///< N
  std::uint64_t seed = 1;

  double mean(const GripState& s) const;
  /// `repeats` pull tests per grid point, in grid order.
  std::vector<GripSample> generate(const OrientationGrid& grid, int repeats) const;
  nlohmann::json metadata(const OrientationGrid& grid, int repeats) const;
};

}  // namespace riskplan::gp
