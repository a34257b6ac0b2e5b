#include "riskplan/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "riskplan/errors.hpp"
#include "riskplan/grip_dataset.hpp"

namespace riskplan::scenario {

namespace {

using nlohmann::json;
using robot::Vec3;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string join(const std::string& path, std::size_t index) { return path + "[" + std::to_string(index) + "]"; }

void object(const json& j, const std::string& path, const std::set<std::string>& allowed,
            const std::set<std::string>& required = {}) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "$" : path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(join(path, key), "unknown key");
  }
  for (const auto& key : required) {
    if (!j.contains(key)) throw ConfigError(join(path, key), "required key is missing");
  }
}

double number(const json& j, const std::string& path, double lo, double hi, bool lo_open = false) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v) || v < lo || v > hi || (lo_open && v == lo)) {
    std::ostringstream msg;
    msg << "value " << v << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
    throw ConfigError(path, msg.str());
  }
  return v;
}

std::int64_t integer(const json& j, const std::string& path, std::int64_t lo, std::int64_t hi) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < lo || v > hi) {
    throw ConfigError(path, "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
  }
  return v;
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

std::vector<double> numbers(const json& j, const std::string& path, std::size_t size, double lo, double hi) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  if (size && j.size() != size) throw ConfigError(path, "expected " + std::to_string(size) + " entries");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], join(path, i), lo, hi));
  return out;
}

Vec3 vec3(const json& j, const std::string& path, double lim = 10.0) {
  const auto v = numbers(j, path, 3, -lim, lim);
  return {v[0], v[1], v[2]};
}

constexpr double kBig = 1e12;

void check_walls(const json& j, const std::string& path) {
  object(j, path, {"right", "left"});
  for (const auto& [name, wall] : j.items()) {
    const std::string wp = join(path, name);
    object(wall, wp, {"base_lambda", "patches", "region"});
    if (wall.contains("base_lambda")) number(wall["base_lambda"], join(wp, "base_lambda"), 0.0, 10.0);
    if (wall.contains("patches")) {
      const auto& ps = wall["patches"];
      if (!ps.is_array()) throw ConfigError(join(wp, "patches"), "expected an array");
      for (std::size_t k = 0; k < ps.size(); ++k) {
        const std::string pp = join(join(wp, "patches"), k);
        object(ps[k], pp, {"u", "v", "lambda"}, {"u", "v", "lambda"});
        const auto u = numbers(ps[k]["u"], join(pp, "u"), 2, -kBig, kBig);
        const auto v = numbers(ps[k]["v"], join(pp, "v"), 2, -kBig, kBig);
        if (!(u[0] < u[1])) throw ConfigError(join(pp, "u"), "expected [min, max] with min < max");
        if (!(v[0] < v[1])) throw ConfigError(join(pp, "v"), "expected [min, max] with min < max");
        number(ps[k]["lambda"], join(pp, "lambda"), 0.0, 10.0);
      }
    }
    if (wall.contains("region")) {
      const auto& r = wall["region"];
      const std::string rp = join(wp, "region");
      if (!r.is_array() || r.size() < 3) throw ConfigError(rp, "expected at least 3 [u, v] vertices");
      for (std::size_t k = 0; k < r.size(); ++k) numbers(r[k], join(rp, k), 2, -kBig, kBig);
    }
  }
}

}  // namespace

void validate_config(const json& doc) {
  object(doc, "",
         {"name", "robot", "terrain", "gait", "risk", "weights", "bounds", "start", "destination", "gp", "solver",
          "validation", "output"},
         {"robot", "terrain", "gait", "risk", "gp"});
  if (doc.contains("name")) string(doc["name"], "name");

  const auto& r = doc["robot"];
  object(r, "robot", {"preset", "mass", "torque_limit", "joint_stiffness", "link_lengths", "joint_lower", "joint_upper"});
  if (r.contains("preset") && string(r["preset"], "robot.preset") != "hexapod") {
    throw ConfigError("robot.preset", "only 'hexapod' is available");
  }
  if (r.contains("mass")) number(r["mass"], "robot.mass", 0.0, 1000.0, true);
  if (r.contains("torque_limit")) number(r["torque_limit"], "robot.torque_limit", 0.0, 1000.0, true);
  if (r.contains("joint_stiffness")) number(r["joint_stiffness"], "robot.joint_stiffness", 0.0, 1e6, true);
  if (r.contains("link_lengths")) {
    for (double l : numbers(r["link_lengths"], "robot.link_lengths", 3, 0.0, 10.0)) {
      if (!(l > 0.0)) throw ConfigError("robot.link_lengths", "link lengths must be > 0");
    }
  }
  if (r.contains("joint_lower")) numbers(r["joint_lower"], "robot.joint_lower", 3, -7.0, 7.0);
  if (r.contains("joint_upper")) numbers(r["joint_upper"], "robot.joint_upper", 3, -7.0, 7.0);

  const auto& t = doc["terrain"];
  object(t, "terrain", {"gap", "half_length", "z_min", "z_max", "base_lambda", "ramp_width", "walls"});
  if (t.contains("gap")) number(t["gap"], "terrain.gap", 0.0, 10.0, true);
  if (t.contains("half_length")) number(t["half_length"], "terrain.half_length", 0.0, 100.0, true);
  if (t.contains("z_min")) number(t["z_min"], "terrain.z_min", -100.0, 100.0);
  if (t.contains("z_max")) number(t["z_max"], "terrain.z_max", -100.0, 100.0);
  if (t.contains("base_lambda")) number(t["base_lambda"], "terrain.base_lambda", 0.0, 10.0);
  if (t.contains("ramp_width")) number(t["ramp_width"], "terrain.ramp_width", 0.0, 1.0, true);
  if (t.contains("walls")) check_walls(t["walls"], "terrain.walls");

  const auto& g = doc["gait"];
  object(g, "gait", {"type", "rounds", "phases"}, {"type"});
  const std::string type = string(g["type"], "gait.type");
  if (type != "one-leg" && type != "tripod" && type != "custom") {
    throw ConfigError("gait.type", "expected 'one-leg', 'tripod' or 'custom'");
  }
  if (g.contains("rounds")) integer(g["rounds"], "gait.rounds", 1, 7);
  if (type == "custom") {
    if (!g.contains("phases")) throw ConfigError("gait.phases", "required for a custom gait");
    const auto& ph = g["phases"];
    if (!ph.is_array() || ph.empty()) throw ConfigError("gait.phases", "expected a non-empty array of instants");
    for (std::size_t k = 0; k < ph.size(); ++k) {
      const std::string pp = join("gait.phases", k);
      if (!ph[k].is_array()) throw ConfigError(pp, "expected an array of limb phases");
      for (std::size_t i = 0; i < ph[k].size(); ++i) {
        const std::string s = string(ph[k][i], join(pp, i));
        if (s != "old" && s != "swing" && s != "new") throw ConfigError(join(pp, i), "expected old, swing or new");
      }
    }
  } else if (g.contains("phases")) {
    throw ConfigError("gait.phases", "only allowed for a custom gait");
  }

  const auto& k = doc["risk"];
  object(k, "risk", {"delta", "forced_M"}, {"delta"});
  number(k["delta"], "risk.delta", 0.0, 1.0);
  if (k["delta"].get<double>() >= 1.0) throw ConfigError("risk.delta", "must be < 1");
  if (k.contains("forced_M")) integer(k["forced_M"], "risk.forced_M", 1, 1000000);

  if (doc.contains("weights")) {
    const auto& w = doc["weights"];
    object(w, "weights", {"destination", "body_position", "foot", "body_rotation", "force"});
    for (const auto& [key, v] : w.items()) number(v, join("weights", key), 0.0, 1e9);
  }
  if (doc.contains("bounds")) {
    const auto& b = doc["bounds"];
    object(b, "bounds", {"body_position", "body_rotation", "foot", "deflection", "force", "tilt"});
    for (const auto& [key, v] : b.items()) number(v, join("bounds", key), 0.0, 1e6, true);
    if (b.contains("tilt")) number(b["tilt"], "bounds.tilt", 0.0, 1.5, true);
  }
  if (doc.contains("start")) {
    const auto& s = doc["start"];
    object(s, "start", {"position", "rpy"});
    if (s.contains("position")) vec3(s["position"], "start.position");
    if (s.contains("rpy")) vec3(s["rpy"], "start.rpy", 1.5);
  }
  if (doc.contains("destination")) {
    const auto& d = doc["destination"];
    object(d, "destination", {"shift", "rpy", "feet_shift"});
    if (d.contains("shift")) vec3(d["shift"], "destination.shift");
    if (d.contains("rpy")) vec3(d["rpy"], "destination.rpy", 1.5);
    if (d.contains("feet_shift")) {
      const auto& fs = d["feet_shift"];
      if (!fs.is_array()) throw ConfigError("destination.feet_shift", "expected an array of [x, y, z] per limb");
      for (std::size_t i = 0; i < fs.size(); ++i) vec3(fs[i], join("destination.feet_shift", i));
    }
  }

  const auto& p = doc["gp"];
  object(p, "gp", {"dataset", "synthetic", "optimize", "hyperparams"});
  if (p.contains("dataset") == p.contains("synthetic")) {
    throw ConfigError("gp", "exactly one of 'dataset' or 'synthetic' is required");
  }
  if (p.contains("dataset")) string(p["dataset"], "gp.dataset");
  if (p.contains("synthetic")) {
    const auto& s = p["synthetic"];
    object(s, "gp.synthetic", {"seed", "repeats", "c0", "c1", "c2", "noise_std"});
    if (s.contains("seed")) integer(s["seed"], "gp.synthetic.seed", 0, std::numeric_limits<std::int64_t>::max());
    if (s.contains("repeats")) integer(s["repeats"], "gp.synthetic.repeats", 1, 1000);
    for (const char* key : {"c0", "c1", "c2", "noise_std"}) {
      if (s.contains(key)) number(s[key], join("gp.synthetic", key), 0.0, 1e6);
    }
  }
  if (p.contains("optimize")) boolean(p["optimize"], "gp.optimize");
  if (p.contains("hyperparams")) {
    const auto& h = p["hyperparams"];
    object(h, "gp.hyperparams", {"sigma_f", "ell", "sigma_n"}, {"sigma_f", "ell", "sigma_n"});
    number(h["sigma_f"], "gp.hyperparams.sigma_f", 0.0, 1e6, true);
    number(h["ell"], "gp.hyperparams.ell", 0.0, 1e6, true);
    number(h["sigma_n"], "gp.hyperparams.sigma_n", 0.0, 1e6);
  }

  if (doc.contains("solver")) {
    const auto& s = doc["solver"];
    object(s, "solver", {"tol_feas", "tol_kkt", "max_outer", "max_inner", "rho0", "rho_growth", "initial_curvature", "starts"});
    if (s.contains("tol_feas")) number(s["tol_feas"], "solver.tol_feas", 0.0, 1.0, true);
    if (s.contains("tol_kkt")) number(s["tol_kkt"], "solver.tol_kkt", 0.0, 1.0, true);
    if (s.contains("max_outer")) integer(s["max_outer"], "solver.max_outer", 1, 10000);
    if (s.contains("max_inner")) integer(s["max_inner"], "solver.max_inner", 1, 1000000);
    if (s.contains("rho0")) number(s["rho0"], "solver.rho0", 0.0, 1e12, true);
    if (s.contains("rho_growth")) number(s["rho_growth"], "solver.rho_growth", 1.0, 1e6, true);
    if (s.contains("initial_curvature")) number(s["initial_curvature"], "solver.initial_curvature", 0.0, 1e6, true);
    if (s.contains("starts")) {
      const auto v = numbers(s["starts"], "solver.starts", 0, 0.0, 1.0);
      if (v.empty()) throw ConfigError("solver.starts", "expected at least one start");
    }
  }
  if (doc.contains("validation")) {
    const auto& v = doc["validation"];
    object(v, "validation", {"samples", "seed", "threads"});
    if (v.contains("samples")) integer(v["samples"], "validation.samples", 1, 1000000000);
    if (v.contains("seed")) integer(v["seed"], "validation.seed", 0, std::numeric_limits<std::int64_t>::max());
    if (v.contains("threads")) integer(v["threads"], "validation.threads", 0, 1024);
  }
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    object(o, "output", {"dir", "plan", "footholds", "risk_csv", "iteration_log"});
    for (const auto& [key, v] : o.items()) string(v, join("output", key));
  }
}

Scenario build_scenario(const json& doc, const std::filesystem::path& base_dir) {
  validate_config(doc);
  Scenario sc;
  sc.config = doc;
  sc.name = doc.value("name", std::string("scenario"));
  auto& pr = sc.problem;

  // Robot.
  pr.robot = robot::RobotModel::default_hexapod();
  const auto& r = doc["robot"];
  if (r.contains("mass")) pr.robot.mass = r["mass"].get<double>();
  for (auto& limb : pr.robot.limbs) {
    if (r.contains("torque_limit")) limb.torque_limit = r["torque_limit"].get<double>();
    if (r.contains("joint_stiffness")) limb.joint_stiffness.assign(3, r["joint_stiffness"].get<double>());
    if (r.contains("link_lengths")) limb.link_lengths = r["link_lengths"].get<std::vector<double>>();
    if (r.contains("joint_lower")) limb.joint_lower = r["joint_lower"].get<std::vector<double>>();
    if (r.contains("joint_upper")) limb.joint_upper = r["joint_upper"].get<std::vector<double>>();
  }
  try {
    pr.robot.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError("robot", e.what());
  }

  // Terrain.
  const auto& t = doc["terrain"];
  const double gap = t.value("gap", 1.2);
  pr.terrain = terrain::TerrainMap::parallel_walls(gap, t.value("base_lambda", 2.3), t.value("half_length", 1.0),
                                                   t.value("z_min", -0.5), t.value("z_max", 1.0));
  for (std::size_t w = 0; w < pr.terrain.walls.size(); ++w) {
    auto& wall = pr.terrain.walls[w];
    wall.ramp_width = t.value("ramp_width", 0.05);
    if (!t.contains("walls") || !t["walls"].contains(wall.name)) continue;
    const auto& wj = t["walls"][wall.name];
    if (wj.contains("base_lambda")) wall.base_lambda = wj["base_lambda"].get<double>();
    if (wj.contains("patches")) {
      for (const auto& p : wj["patches"]) {
        wall.patches.push_back({p["u"][0].get<double>(), p["u"][1].get<double>(), p["v"][0].get<double>(),
                                p["v"][1].get<double>(), p["lambda"].get<double>()});
      }
    }
    if (wj.contains("region")) {
      wall.region.clear();
      for (const auto& v : wj["region"]) wall.region.emplace_back(v[0].get<double>(), v[1].get<double>());
    }
  }
  try {
    pr.terrain.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError("terrain", e.what());
  }
  for (const auto& limb : pr.robot.limbs) pr.limb_wall.push_back(limb.mount_position.y() < 0.0 ? 0 : 1);

  // Gait.
  const auto& g = doc["gait"];
  const std::string type = g["type"].get<std::string>();
  const int rounds = g.value("rounds", 1);
  if (type == "one-leg") {
    pr.gait = planner::GaitSchedule::one_leg(pr.robot.limb_count(), rounds);
  } else if (type == "tripod") {
    if (pr.robot.limb_count() != 6) throw ConfigError("gait.type", "tripod gait needs six limbs");
    pr.gait = planner::GaitSchedule::tripod(rounds);
  } else {
    pr.gait.name = "custom";
    pr.gait.rounds = rounds;
    for (const auto& row : g["phases"]) {
      std::vector<planner::LimbPhase> phases;
      for (const auto& s : row) {
        const auto v = s.get<std::string>();
        phases.push_back(v == "old" ? planner::LimbPhase::Old
                                    : v == "swing" ? planner::LimbPhase::Swing : planner::LimbPhase::New);
      }
      pr.gait.phases.push_back(phases);
    }
  }
  try {
    pr.gait.validate(pr.robot.limb_count());
  } catch (const InvalidInput& e) {
    throw ConfigError("gait", e.what());
  }

  // Risk, weights, bounds.
  pr.delta = doc["risk"]["delta"].get<double>();
  if (doc["risk"].contains("forced_M")) pr.forced_m = doc["risk"]["forced_M"].get<int>();
  if (doc.contains("weights")) {
    const auto& w = doc["weights"];
    pr.weights.destination = w.value("destination", pr.weights.destination);
    pr.weights.body_position = w.value("body_position", pr.weights.body_position);
    pr.weights.foot = w.value("foot", pr.weights.foot);
    pr.weights.body_rotation = w.value("body_rotation", pr.weights.body_rotation);
    pr.weights.force = w.value("force", pr.weights.force);
  }
  if (doc.contains("bounds")) {
    const auto& b = doc["bounds"];
    pr.bounds.body_position = b.value("body_position", pr.bounds.body_position);
    pr.bounds.body_rotation = b.value("body_rotation", pr.bounds.body_rotation);
    pr.bounds.foot = b.value("foot", pr.bounds.foot);
    pr.force_limit = b.value("force", pr.force_limit);
    pr.tilt_limit = b.value("tilt", pr.tilt_limit);
    sc.validation.deflection_threshold = b.value("deflection", sc.validation.deflection_threshold);
  }

  // Start and destination.
  robot::BodyPose start;
  if (doc.contains("start")) {
    const auto& s = doc["start"];
    if (s.contains("position")) start.position = vec3(s["position"], "start.position");
    if (s.contains("rpy")) start.rpy = vec3(s["rpy"], "start.rpy", 1.5);
  }
  try {
    pr.start = planner::default_stance(pr.robot, pr.terrain, pr.limb_wall, start);
  } catch (const InvalidInput& e) {
    throw ConfigError("start", e.what());
  }
  for (int i = 0; i < pr.robot.limb_count(); ++i) {
    const auto& limb = pr.robot.limbs[static_cast<std::size_t>(i)];
    pr.reference_tip.push_back(start.rotation() * limb.mount_rotation *
                               robot::chain_fk(limb, pr.start.joints[static_cast<std::size_t>(i)]).rotation);
  }
  Vec3 shift = Vec3::Zero();
  pr.destination_pose = start;
  if (doc.contains("destination")) {
    const auto& d = doc["destination"];
    if (d.contains("shift")) shift = vec3(d["shift"], "destination.shift");
    if (d.contains("rpy")) pr.destination_pose.rpy = vec3(d["rpy"], "destination.rpy", 1.5);
  }
  pr.destination_pose.position += shift;
  for (int i = 0; i < pr.robot.limb_count(); ++i) {
    Vec3 f = pr.start.feet[static_cast<std::size_t>(i)] + shift;
    if (doc.contains("destination") && doc["destination"].contains("feet_shift")) {
      const auto& fs = doc["destination"]["feet_shift"];
      if (static_cast<int>(fs.size()) != pr.robot.limb_count()) {
        throw ConfigError("destination.feet_shift", "expected one entry per limb");
      }
      f = pr.start.feet[static_cast<std::size_t>(i)] + vec3(fs[static_cast<std::size_t>(i)], "destination.feet_shift");
    }
    pr.destination_feet.push_back(f);
  }

  // Gripping-force model.
  const auto& gj = doc["gp"];
  std::vector<gp::GripSample> samples;
  std::optional<gp::GeneratorInfo> info;
  if (gj.contains("synthetic")) {
    const auto& s = gj["synthetic"];
    gp::SyntheticGripGenerator gen;
    gen.seed = s.value("seed", std::uint64_t{1});
    gen.c0 = s.value("c0", gen.c0);
    gen.c1 = s.value("c1", gen.c1);
    gen.c2 = s.value("c2", gen.c2);
    gen.noise_std = s.value("noise_std", gen.noise_std);
    const int repeats = s.value("repeats", 20);
    const auto grid = gp::OrientationGrid::training();
    samples = gen.generate(grid, repeats);
    info = gp::GeneratorInfo{gen.metadata(grid, repeats)};
  } else {
    std::filesystem::path path = gj["dataset"].get<std::string>();
    if (path.is_relative()) path = base_dir / path;
    samples = gp::read_dataset(path);
  }
  gp::Hyperparams hp0 = gp::default_hyperparams(samples);
  if (gj.contains("hyperparams")) {
    hp0.sigma_f = gj["hyperparams"]["sigma_f"].get<double>();
    hp0.ell = gj["hyperparams"]["ell"].get<double>();
    hp0.sigma_n = gj["hyperparams"]["sigma_n"].get<double>();
  }
  auto model = std::make_shared<gp::GPModel>(gp::GPModel::fit(samples, hp0, gj.value("optimize", true)));
  model->generator = info;
  pr.gp = model;

  // Solver and run options.
  if (doc.contains("solver")) {
    const auto& s = doc["solver"];
    pr.solver.tol_feas = s.value("tol_feas", pr.solver.tol_feas);
    pr.solver.tol_kkt = s.value("tol_kkt", pr.solver.tol_kkt);
    pr.solver.max_outer = s.value("max_outer", pr.solver.max_outer);
    pr.solver.max_inner = s.value("max_inner", pr.solver.max_inner);
    pr.solver.rho0 = s.value("rho0", pr.solver.rho0);
    pr.solver.rho_growth = s.value("rho_growth", pr.solver.rho_growth);
    pr.solver.initial_curvature = s.value("initial_curvature", pr.solver.initial_curvature);
    if (s.contains("starts")) sc.plan_options.foot_blends = s["starts"].get<std::vector<double>>();
  }
  if (doc.contains("validation")) {
    const auto& v = doc["validation"];
    sc.validation.samples = v.value("samples", sc.validation.samples);
    sc.validation.seed = v.value("seed", sc.validation.seed);
    sc.validation.threads = v.value("threads", sc.validation.threads);
  }
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    sc.output.dir = o.value("dir", sc.output.dir.string());
    sc.output.plan = o.value("plan", sc.output.plan);
    sc.output.footholds = o.value("footholds", sc.output.footholds);
    sc.output.risk_csv = o.value("risk_csv", sc.output.risk_csv);
    sc.output.iteration_log = o.value("iteration_log", sc.output.iteration_log);
  }
  if (sc.output.dir.is_relative()) sc.output.dir = base_dir / sc.output.dir;
  try {
    pr.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError("$", e.what());
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return build_scenario(doc, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace riskplan::scenario
