#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "riskplan/errors.hpp"
#include "riskplan/plan_io.hpp"
#include "scenario_fixture.hpp"

using namespace riskplan;
using nlohmann::json;

namespace {

std::string config_error_path(const json& doc) {
  try {
    scenario::validate_config(doc);
  } catch (const ConfigError& e) {
    return e.key_path();
  }
  return "";
}

const scenario::Scenario& tripod_scenario() {
  static const auto sc = testutil::build(testutil::scenario_json("tripod_flip"));
  return sc;
}

const io::PlanArtifacts& tripod_artifacts() {
  static const auto art = [] {
    auto sc = tripod_scenario();
    sc.validation.samples = 10000;
    return io::run_scenario(sc);
  }();
  return art;
}

}  // namespace

TEST_CASE("shipped scenarios validate") {
  for (const char* name : {"tripod_flip", "energy_sweep", "nonuniform_walls"}) {
    INFO(name);
    CHECK_NOTHROW(scenario::validate_config(testutil::scenario_json(name)));
  }
}

TEST_CASE("config errors name the key path") {
  auto doc = testutil::scenario_json("tripod_flip");
  SUBCASE("missing risk budget") {
    doc["risk"].erase("delta");
    CHECK(config_error_path(doc) == "risk.delta");
  }
  SUBCASE("unknown key") {
    doc["gait"]["speed"] = 1.0;
    CHECK(config_error_path(doc) == "gait.speed");
  }
  SUBCASE("wrong type") {
    doc["terrain"]["gap"] = "wide";
    CHECK(config_error_path(doc) == "terrain.gap");
  }
  SUBCASE("bad gait type") {
    doc["gait"]["type"] = "gallop";
    CHECK(config_error_path(doc) == "gait.type");
  }
  SUBCASE("not an object") { CHECK(config_error_path(json::array()) == "$"); }
}

TEST_CASE("loading a malformed file reports the root path") {
  const auto dir = std::filesystem::temp_directory_path() / "riskplan_scenario_io";
  std::filesystem::create_directories(dir);
  const auto path = dir / "broken.json";
  std::ofstream(path) << "{\"name\": ";
  try {
    scenario::load_scenario(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key_path() == "$");
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("trajectory JSON round trip") {
  const auto& art = tripod_artifacts();
  REQUIRE(art.result.status == nlp::Status::Converged);
  const json a = io::trajectory_to_json(art.result.trajectory);
  const auto back = io::trajectory_from_json(a);
  CHECK(io::trajectory_to_json(back) == a);
  CHECK(json::parse(a.dump()) == a);
  CHECK(back.instants.size() == art.result.trajectory.instants.size());
  CHECK(back.instants[1].limbs[2].force == art.result.trajectory.instants[1].limbs[2].force);
}

TEST_CASE("plan document validates and is reproducible") {
  const auto& sc = tripod_scenario();
  const auto& art = tripod_artifacts();
  REQUIRE(art.result.status == nlp::Status::Converged);
  const json doc = io::plan_document(sc, art, "2026-01-01T00:00:00Z");
  CHECK_NOTHROW(io::validate_plan_json(doc));
  CHECK_NOTHROW(io::validate_plan_json(json::parse(doc.dump())));
  CHECK(doc["metadata"]["timestamp"] == "2026-01-01T00:00:00Z");
  CHECK_FALSE(io::plan_document(sc, art, "")["metadata"].contains("timestamp"));

  auto again = sc;
  again.validation.samples = 10000;
  const auto art2 = io::run_scenario(again);
  CHECK(io::plan_document(sc, art2, "").dump() == io::plan_document(sc, art, "").dump());

  SUBCASE("structural errors") {
    json bad = doc;
    bad.erase("trajectory");
    CHECK_THROWS_AS(io::validate_plan_json(bad), InvalidInput);
    bad = doc;
    bad["metadata"]["schema_version"] = 99;
    CHECK_THROWS_AS(io::validate_plan_json(bad), InvalidInput);
    bad = doc;
    bad["status"] = "Maybe";
    CHECK_THROWS_AS(io::validate_plan_json(bad), InvalidInput);
    bad = doc;
    bad["trajectory"]["footholds"].erase(0);
    CHECK_THROWS_AS(io::validate_plan_json(bad), InvalidInput);
  }
}

TEST_CASE("footholds and sweep CSV") {
  const auto& sc = tripod_scenario();
  const auto& art = tripod_artifacts();
  REQUIRE(art.result.status == nlp::Status::Converged);
  std::ostringstream s;
  io::write_footholds_csv(s, art.result.trajectory, sc.problem);
  const std::string csv = s.str();
  CHECK(csv.rfind("round,limb,x,y,z,mu_at_foot\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 6);

  std::ostringstream w;
  io::write_sweep_csv(w, {{0.1, "Converged", 1.0, 0.0, 2.0}, {0.0, "Infeasible", 0.0, 0.0, 0.0}});
  const std::string sweep = w.str();
  CHECK(sweep.rfind("delta,status,energy_proxy,min_margin,solve_time_s\n", 0) == 0);
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 3);
}

TEST_CASE("atomic write replaces the file") {
  const auto dir = std::filesystem::temp_directory_path() / "riskplan_atomic";
  std::filesystem::create_directories(dir);
  const auto path = dir / "out.txt";
  io::write_file_atomic(path, "first");
  io::write_file_atomic(path, "second");
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(content == "second");
  CHECK(std::distance(std::filesystem::directory_iterator(dir), std::filesystem::directory_iterator()) == 1);
  std::filesystem::remove_all(dir);
}
