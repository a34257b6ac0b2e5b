#include "riskplan/grip_dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "riskplan/errors.hpp"
#include "riskplan/random_stream.hpp"

namespace riskplan::gp {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_field(const std::string& text, int line, const char* name) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw DatasetError("line " + std::to_string(line) + ": cannot parse " + name + " from '" + t + "'", line);
  }
  return v;
}

}  // namespace

std::vector<GripSample> read_dataset(std::istream& in) {
  std::string line;
  int line_no = 0;
  std::vector<GripSample> samples;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!header_seen) {
      if (trim(line) != kDatasetHeader) {
        throw DatasetError("line " + std::to_string(line_no) + ": expected header '" + kDatasetHeader + "'",
                           line_no);
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) {
      throw DatasetError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                             std::to_string(fields.size()),
                         line_no);
    }
    GripSample s;
    s.state.alpha = parse_field(fields[0], line_no, "alpha_deg") * kDeg;
    s.state.beta = parse_field(fields[1], line_no, "beta_deg") * kDeg;
    s.state.gamma = parse_field(fields[2], line_no, "gamma_deg") * kDeg;
    s.state.lambda = parse_field(fields[3], line_no, "mu");
    s.force = parse_field(fields[4], line_no, "force_n");
    if (s.state.lambda < 0.0) throw DatasetError("line " + std::to_string(line_no) + ": mu must be >= 0", line_no);
    if (s.force < 0.0) throw DatasetError("line " + std::to_string(line_no) + ": force_n must be >= 0", line_no);
    samples.push_back(s);
  }
  if (!header_seen) throw DatasetError("empty dataset: missing header", line_no == 0 ? 1 : line_no);
  if (samples.empty()) throw DatasetError("dataset has a header but no rows", line_no);
  return samples;
}

std::vector<GripSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open dataset " + path.string());
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const std::vector<GripSample>& samples) {
  out << kDatasetHeader << '\n';
  char buf[160];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.6f\n", s.state.alpha / kDeg, s.state.beta / kDeg,
                  s.state.gamma / kDeg, s.state.lambda, s.force);
    out << buf;
  }
}

void write_dataset(const std::filesystem::path& path, const std::vector<GripSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write dataset " + path.string());
  write_dataset(out, samples);
  if (!out) throw InvalidInput("write failed for " + path.string());
}

OrientationGrid OrientationGrid::training() {
  return {{-15.0, 0.0, 15.0}, {-15.0, 0.0, 15.0}, {0.0, 30.0, 60.0}, {1.1, 2.3}};
}

std::size_t OrientationGrid::size() const {
  return alpha_deg.size() * beta_deg.size() * gamma_deg.size() * lambda.size();
}

void OrientationGrid::validate() const {
  if (size() == 0) throw InvalidInput("orientation grid is empty");
  for (double l : lambda) {
    if (!(l >= 0.0)) throw InvalidInput("orientation grid: lambda must be >= 0");
  }
}

double SyntheticGripGenerator::mean(const GripState& s) const {
  return c0 * s.lambda * (1.0 + c1 * std::cos(s.alpha) * std::cos(s.beta)) * (1.0 + c2 * std::cos(s.gamma));
}

std::vector<GripSample> SyntheticGripGenerator::generate(const OrientationGrid& grid, int repeats) const {
  grid.validate();
  if (repeats < 1) throw InvalidInput("generator: repeats must be >= 1");
  const CounterStream stream(seed);
  std::vector<GripSample> out;
  out.reserve(grid.size() * static_cast<std::size_t>(repeats));
  std::uint64_t counter = 0;
  for (double a : grid.alpha_deg) {
    for (double b : grid.beta_deg) {
      for (double g : grid.gamma_deg) {
        for (double l : grid.lambda) {
          const GripState s{a * kDeg, b * kDeg, g * kDeg, l};
          const double m = mean(s);
          for (int r = 0; r < repeats; ++r) {
            const double force = std::max(0.0, m + noise_std * stream.normal(counter++));
            out.push_back({s, force});
          }
        }
      }
    }
  }
  return out;
}

nlohmann::json SyntheticGripGenerator::metadata(const OrientationGrid& grid, int repeats) const {
  return {{"model", "c0*lambda*(1+c1*cos(alpha)*cos(beta))*(1+c2*cos(gamma)) + N(0, noise_std^2)"},
          {"c0", c0},
          {"c1", c1},
          {"c2", c2},
          {"noise_std", noise_std},
          {"seed", seed},
          {"repeats", repeats},
          {"grid",
           {{"alpha_deg", grid.alpha_deg},
            {"beta_deg", grid.beta_deg},
            {"gamma_deg", grid.gamma_deg},
            {"lambda", grid.lambda}}}};
}

}  // namespace riskplan::gp
