#pragma once

// Plan pipeline (plan, deflection, audit, certification) and its JSON/CSV
// artifacts.

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "riskplan/planner.hpp"
#include "riskplan/scenario.hpp"
#include "riskplan/validator.hpp"

namespace riskplan::io {

inline constexpr int kPlanSchemaVersion = 1;

struct PlanArtifacts {
  planner::PlanResult result;
  std::optional<planner::DeflectionSolution> deflection;
  std::string deflection_error;  ///< set when the deflection bound cannot be met
  std::optional<validator::AuditReport> audit;
  std::optional<validator::RiskReport> risk;
  planner::EnergyProxy energy;
  double solve_time_s = 0.0;
};

/// Plans the scenario. Converged plans are followed by deflection replay,
/// audit and Monte-Carlo certification.
PlanArtifacts run_scenario(const scenario::Scenario& sc);

nlohmann::json trajectory_to_json(const planner::Trajectory& traj);
planner::Trajectory trajectory_from_json(const nlohmann::json& doc);
nlohmann::json deflection_to_json(const planner::DeflectionSolution& d);

/// Full plan document. The timestamp is the only field that varies between
/// runs of the same scenario; pass an empty string to omit it.
nlohmann::json plan_document(const scenario::Scenario& sc, const PlanArtifacts& art, const std::string& timestamp);

/// Structural check of a plan document; throws InvalidInput naming the path.
void validate_plan_json(const nlohmann::json& doc);

/// `round,limb,x,y,z,mu_at_foot`; round 0 is the start stance.
void write_footholds_csv(std::ostream& out, const planner::Trajectory& traj, const planner::PlanProblem& problem);

struct SweepRow {
  double delta = 0.0;
  std::string status;
  double energy_proxy = 0.0;
  double min_margin = 0.0;
  double solve_time_s = 0.0;
};

/// `delta,status,energy_proxy,min_margin,solve_time_s`.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string utc_timestamp();

}  // namespace riskplan::io
