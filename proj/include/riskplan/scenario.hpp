#pragma once

// Scenario configuration: strict JSON schema and construction of the
// planning problem it describes.

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "riskplan/planner.hpp"

namespace riskplan::scenario {

struct ValidationConfig {
  std::int64_t samples = 100000;
  std::uint64_t seed = 7;
  int threads = 0;
  double deflection_threshold = 0.02;  ///< m
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  std::string plan = "plan.json";
  std::string footholds = "footholds.csv";
  std::string risk_csv = "risk.csv";
  std::string iteration_log;  ///< empty disables the log
};

struct Scenario {
  std::string name;
  planner::PlanProblem problem;
  planner::PlanOptions plan_options;
  ValidationConfig validation;
  OutputConfig output;
  nlohmann::json config;  ///< the validated input document
};

/// Throws ConfigError naming the offending key path. Unknown keys are errors.
void validate_config(const nlohmann::json& doc);

/// Validates, fits or loads the GP and builds the plan problem. Relative
/// paths resolve against `base_dir`.
Scenario build_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Parses a config file; JSON syntax errors become ConfigError at key "$".
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace riskplan::scenario
