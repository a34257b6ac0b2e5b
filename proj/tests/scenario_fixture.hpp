#pragma once

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "riskplan/scenario.hpp"

namespace testutil {

inline std::filesystem::path scenario_dir() { return RISKPLAN_SCENARIO_DIR; }

inline nlohmann::json scenario_json(const std::string& name) {
  std::ifstream in(scenario_dir() / (name + ".json"));
  return nlohmann::json::parse(in);
}

inline riskplan::scenario::Scenario build(const nlohmann::json& doc) {
  return riskplan::scenario::build_scenario(doc, scenario_dir());
}

}  // namespace testutil
