#include "riskplan/plan_io.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "riskplan/errors.hpp"

namespace riskplan::io {

namespace {

using nlohmann::json;
using planner::Vec3;

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
json vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidInput("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::VectorXd vecx(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void require(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw InvalidInput("plan JSON: " + path + " is not an object");
  for (const char* k : keys) {
    if (!j.contains(k)) throw InvalidInput("plan JSON: missing " + (path.empty() ? std::string(k) : path + "." + k));
  }
}

}  // namespace

PlanArtifacts run_scenario(const scenario::Scenario& sc) {
  PlanArtifacts art;
  const auto t0 = std::chrono::steady_clock::now();
  art.result = planner::plan(sc.problem, sc.plan_options);
  art.solve_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (art.result.status != nlp::Status::Converged) return art;

  const auto& traj = art.result.trajectory;
  art.energy = planner::energy_proxy(traj);
  try {
    art.deflection = planner::solve_deflection(traj, sc.problem.robot, sc.validation.deflection_threshold);
  } catch (const DeflectionBoundExceeded& e) {
    art.deflection_error = e.what();
  }
  art.audit = validator::audit(traj, sc.problem);
  art.risk = validator::certify(traj, *sc.problem.gp, sc.validation.samples, sc.validation.seed, sc.validation.threads);
  return art;
}

json trajectory_to_json(const planner::Trajectory& traj) {
  json instants = json::array();
  for (const auto& inst : traj.instants) {
    json limbs = json::array();
    for (const auto& c : inst.limbs) {
      json l = {{"contact", c.contact}, {"theta", vec(c.theta)}};
      if (c.contact) {
        l["wall"] = c.wall;
        l["frame"] = {{"n", vec(c.frame.n)}, {"zeta", vec(c.frame.zeta)}, {"xi", vec(c.frame.xi)}};
        l["foot"] = vec(c.foot);
        l["force"] = vec(c.force);
        l["grip_angles"] = vec(c.grip_angles);
        l["lambda"] = c.lambda;
        l["grip_mean"] = c.grip_mean;
        l["grip_variance"] = c.grip_variance;
        l["cone_margin"] = c.cone_margin;
        l["torque"] = vec(c.torque);
        l["torque_margin"] = c.torque_margin;
      }
      limbs.push_back(std::move(l));
    }
    instants.push_back({{"round", inst.round},
                        {"phase", inst.phase},
                        {"position", vec(inst.pose.position)},
                        {"rpy", vec(inst.pose.rpy)},
                        {"limbs", std::move(limbs)}});
  }
  json footholds = json::array();
  for (const auto& round : traj.footholds) {
    json r = json::array();
    for (const auto& f : round) r.push_back(vec(f));
    footholds.push_back(std::move(r));
  }
  return {{"budget",
           {{"delta", traj.budget.delta},
            {"rounds", traj.budget.rounds},
            {"per_round", traj.budget.per_round},
            {"delta_jk", traj.budget.delta_jk}}},
          {"quantile", traj.quantile},
          {"footholds", std::move(footholds)},
          {"instants", std::move(instants)}};
}

planner::Trajectory trajectory_from_json(const json& doc) {
  require(doc, "trajectory", {"budget", "quantile", "footholds", "instants"});
  planner::Trajectory traj;
  const auto& b = doc["budget"];
  require(b, "trajectory.budget", {"delta", "rounds", "per_round", "delta_jk"});
  traj.budget = {b["delta"].get<double>(), b["rounds"].get<int>(), b["per_round"].get<int>(), b["delta_jk"].get<double>()};
  traj.quantile = doc["quantile"].get<double>();
  for (const auto& r : doc["footholds"]) {
    std::vector<Vec3> round;
    for (const auto& f : r) round.push_back(vec3(f));
    traj.footholds.push_back(std::move(round));
  }
  for (std::size_t t = 0; t < doc["instants"].size(); ++t) {
    const auto& ij = doc["instants"][t];
    const std::string path = "trajectory.instants[" + std::to_string(t) + "]";
    require(ij, path, {"round", "phase", "position", "rpy", "limbs"});
    planner::InstantState inst;
    inst.round = ij["round"].get<int>();
    inst.phase = ij["phase"].get<int>();
    inst.pose.position = vec3(ij["position"]);
    inst.pose.rpy = vec3(ij["rpy"]);
    for (const auto& l : ij["limbs"]) {
      planner::ContactState c;
      c.contact = l.at("contact").get<bool>();
      c.theta = vecx(l.at("theta"));
      if (c.contact) {
        require(l, path + ".limbs[]",
                {"wall", "frame", "foot", "force", "grip_angles", "lambda", "grip_mean", "grip_variance", "cone_margin",
                 "torque", "torque_margin"});
        c.wall = l["wall"].get<int>();
        c.frame.n = vec3(l["frame"].at("n"));
        c.frame.zeta = vec3(l["frame"].at("zeta"));
        c.frame.xi = vec3(l["frame"].at("xi"));
        c.foot = vec3(l["foot"]);
        c.force = vec3(l["force"]);
        c.grip_angles = vec3(l["grip_angles"]);
        c.lambda = l["lambda"].get<double>();
        c.grip_mean = l["grip_mean"].get<double>();
        c.grip_variance = l["grip_variance"].get<double>();
        c.cone_margin = l["cone_margin"].get<std::array<double, 5>>();
        c.torque = vecx(l["torque"]);
        c.torque_margin = l["torque_margin"].get<double>();
      }
      inst.limbs.push_back(std::move(c));
    }
    traj.instants.push_back(std::move(inst));
  }
  return traj;
}

json deflection_to_json(const planner::DeflectionSolution& d) {
  json instants = json::array();
  for (const auto& inst : d.instants) {
    json walls = json::array();
    for (const auto& w : inst.delta_wall) walls.push_back(vec(w));
    instants.push_back({{"limbs", inst.limbs},
                        {"delta_wall", std::move(walls)},
                        {"delta_com", vec(inst.delta_com)},
                        {"residual", inst.residual}});
  }
  return {{"max_residual", d.max_residual}, {"max_wall_norm", d.max_wall_norm}, {"instants", std::move(instants)}};
}

json plan_document(const scenario::Scenario& sc, const PlanArtifacts& art, const std::string& timestamp) {
  const auto& res = art.result;
  json meta = {{"schema_version", kPlanSchemaVersion}, {"scenario", sc.name}};
  if (!timestamp.empty()) meta["timestamp"] = timestamp;
  json doc = {{"metadata", std::move(meta)},
              {"config", sc.config},
              {"status", nlp::to_string(res.status)},
              {"reason", res.reason},
              {"zero_risk", res.zero_risk},
              {"layout",
               {{"n_vars", res.layout.n_vars},
                {"n_eq", res.layout.n_eq},
                {"n_ineq", res.layout.n_ineq},
                {"n_contacts", res.layout.n_contacts},
                {"n_footholds", res.layout.n_footholds},
                {"n_region_edges", res.layout.n_region_edges}}},
              {"solver",
               {{"objective", res.report.objective},
                {"eq_residual", res.report.eq_residual},
                {"ineq_violation", res.report.ineq_violation},
                {"kkt", res.report.kkt},
                {"complementarity", res.report.complementarity},
                {"outer_iterations", res.report.outer_iterations},
                {"inner_iterations", res.report.inner_iterations},
                {"starts_tried", res.starts_tried}}},
              {"gp", sc.problem.gp ? sc.problem.gp->to_json() : json(nullptr)}};
  if (res.status != nlp::Status::Converged) return doc;
  doc["trajectory"] = trajectory_to_json(res.trajectory);
  doc["min_cone_margin"] = res.trajectory.min_cone_margin();
  doc["energy_proxy"] = {{"force", art.energy.force}, {"torque", art.energy.torque}};
  if (art.deflection) doc["deflection"] = deflection_to_json(*art.deflection);
  if (!art.deflection_error.empty()) doc["deflection_error"] = art.deflection_error;
  if (art.audit) doc["audit"] = art.audit->to_json();
  if (art.risk) doc["risk_report"] = art.risk->to_json();
  return doc;
}

void validate_plan_json(const json& doc) {
  require(doc, "", {"metadata", "config", "status", "reason", "layout", "solver", "gp"});
  require(doc["metadata"], "metadata", {"schema_version", "scenario"});
  if (doc["metadata"]["schema_version"] != kPlanSchemaVersion) throw InvalidInput("plan JSON: unsupported schema_version");
  const auto status = doc["status"].get<std::string>();
  if (status != "Converged" && status != "Infeasible" && status != "IterLimit") {
    throw InvalidInput("plan JSON: unknown status '" + status + "'");
  }
  if (status != "Converged") return;
  require(doc, "", {"trajectory", "min_cone_margin", "energy_proxy", "audit", "risk_report"});
  const auto traj = trajectory_from_json(doc["trajectory"]);
  if (traj.instants.empty()) throw InvalidInput("plan JSON: trajectory has no instants");
  const std::size_t limbs = traj.instants.front().limbs.size();
  for (const auto& inst : traj.instants) {
    if (inst.limbs.size() != limbs) throw InvalidInput("plan JSON: inconsistent limb count across instants");
  }
  if (static_cast<int>(traj.footholds.size()) != traj.budget.rounds + 1) {
    throw InvalidInput("plan JSON: expected rounds + 1 foothold sets");
  }
  gp::GPModel::from_json(doc["gp"]);
}

void write_footholds_csv(std::ostream& out, const planner::Trajectory& traj, const planner::PlanProblem& problem) {
  out << "round,limb,x,y,z,mu_at_foot\n";
  out << std::setprecision(10);
  for (std::size_t r = 0; r < traj.footholds.size(); ++r) {
    for (std::size_t i = 0; i < traj.footholds[r].size(); ++i) {
      const Vec3& f = traj.footholds[r][i];
      const auto& wall = problem.terrain.walls[static_cast<std::size_t>(problem.limb_wall[i])];
      out << r << ',' << i << ',' << f.x() << ',' << f.y() << ',' << f.z() << ',' << wall.friction_at(f) << '\n';
    }
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "delta,status,energy_proxy,min_margin,solve_time_s\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.delta << ',' << r.status << ',' << r.energy_proxy << ',' << r.min_margin << ',' << r.solve_time_s << '\n';
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + tmp.string());
    out << content;
    if (!out) throw InvalidInput("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace riskplan::io
