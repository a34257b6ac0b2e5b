// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria. Criterion numbers given as arguments select a
// subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "riskplan/errors.hpp"
#include "riskplan/planner.hpp"
#include "riskplan/random_stream.hpp"
#include "riskplan/risk.hpp"
#include "riskplan/validator.hpp"
#include "scenario_fixture.hpp"

using namespace riskplan;
using planner::Vec3;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
  double seconds = -1.0;  ///< overrides the wall time when >= 0
};

struct Golden {
  scenario::Scenario sc;
  planner::PlanResult result;
  double solve_s = 0.0;
};

const Golden& golden(const std::string& name, double delta) {
  static std::map<std::pair<std::string, double>, Golden> cache;
  const auto key = std::make_pair(name, delta);
  auto it = cache.find(key);
  if (it == cache.end()) {
    auto doc = testutil::scenario_json(name);
    doc["risk"]["delta"] = delta;
    Golden g{testutil::build(doc), {}, 0.0};
    const auto t0 = Clock::now();
    g.result = planner::plan(g.sc.problem, g.sc.plan_options);
    g.solve_s = seconds_since(t0);
    std::printf("  planned %s at Delta=%g: %s in %.1f s\n", name.c_str(), delta, nlp::to_string(g.result.status),
                g.solve_s);
    std::fflush(stdout);
    it = cache.emplace(key, std::move(g)).first;
  }
  return it->second;
}

double scenario_delta(const std::string& name) { return testutil::scenario_json(name)["risk"]["delta"].get<double>(); }

const std::vector<std::pair<std::string, double>>& golden_plans() {
  static const std::vector<std::pair<std::string, double>> plans = {
      {"nonuniform_walls", 0.001}, {"nonuniform_walls", 0.1}, {"energy_sweep", 0.1},  {"energy_sweep", 0.0005},
      {"tripod_flip", 0.01},       {"tripod_flip", 0.1},      {"tripod_flip", 0.4}};
  return plans;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome gp_oracle() {
  std::mt19937_64 rng(2024);
  double worst_mean = 0.0, worst_interp = 0.0;
  bool var_ok = true;
  for (int t = 0; t < 50; ++t) {
    const int n = 1 + static_cast<int>(rng() % 20);
    const auto s = testutil::random_dataset(rng, n);
    const gp::Hyperparams hp{testutil::uniform(rng, 5.0, 40.0), testutil::uniform(rng, 0.3, 2.0),
                             testutil::uniform(rng, 0.05, 3.0)};
    const auto m = gp::GPModel::fit(s, hp, false);
    const testutil::DenseOracle oracle(s, hp);
    for (int q = 0; q < 20; ++q) {
      const auto st = testutil::random_state(rng);
      const auto p = m.predict(st);
      worst_mean = std::max(worst_mean, std::abs(p.mean - oracle.predict(st.as_vector()).mean));
      var_ok = var_ok && p.variance >= 0.0 && p.variance <= hp.sigma_f * hp.sigma_f + 1e-9;
    }
    const auto m0 = gp::GPModel::fit(s, {hp.sigma_f, hp.ell, 0.0}, false);
    for (const auto& smp : s) worst_interp = std::max(worst_interp, std::abs(m0.predict(smp.state).mean - smp.force));
  }
  Outcome o;
  o.pass = worst_mean <= 1e-10 && worst_interp <= 1e-9 && var_ok;
  o.detail = "max |mean - oracle| " + fmt("%.2e", worst_mean) + ", max interpolation error " +
             fmt("%.2e", worst_interp) + ", variance in range " + (var_ok ? "yes" : "no");
  return o;
}

Outcome inverse_cdf() {
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double p = 1e-6 + static_cast<double>(i) / 9999.0 * (1.0 - 2e-6);
    worst = std::max(worst, std::abs(risk::inv_norm_cdf(p) - testutil::bisect_quantile(p)));
  }
  return {worst <= 1e-9, "max abs error " + fmt("%.2e", worst) + " over 1e4 points"};
}

// Every sampled point lies on the reformulated boundary, so the expected
// rate equals Djk. The pass condition is the per-constraint bound; the
// analytic probability and pooled count are reported alongside it.
Outcome reformulation_soundness() {
  std::mt19937_64 rng(2025);
  const CounterStream stream(2026);
  const std::int64_t n = 100000;
  std::uint64_t counter = 0;
  int failures = 0;
  double worst_ratio = 0.0, worst_analytic = 0.0, pooled_bad = 0.0, pooled_mean = 0.0, pooled_var = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Vec3 normal = testutil::uniform_vec(rng, 3, -1, 1);
    if (normal.norm() < 0.1) normal = Vec3::UnitY();
    const Vec3 up = std::abs(normal.normalized().z()) > 0.95 ? Vec3::UnitX() : Vec3::UnitZ();
    const auto frame = robot::ContactFrame::from_normal(normal, up);
    const auto row = risk::friction_cone(frame, testutil::uniform(rng, 0.0, 2.5))[1 + rng() % 4];
    const double mean = testutil::uniform(rng, 5.0, 60.0), sd = testutil::uniform(rng, 0.5, 15.0);
    const double djk = std::pow(10.0, testutil::uniform(rng, -4.0, -1.0));
    const auto det = risk::reformulate(row, mean, sd * sd, djk);
    Vec3 force = testutil::uniform_vec(rng, 3, -80, 80);
    force -= det.alpha * det.residual(force) / det.alpha.squaredNorm();
    std::int64_t bad = 0;
    for (std::int64_t s = 0; s < n; ++s) bad += row.residual(force, mean + sd * stream.normal(counter++)) > 0.0;
    const double rate = static_cast<double>(bad) / static_cast<double>(n);
    const double bound = djk + 3.0 * std::sqrt(djk / static_cast<double>(n));
    if (rate > bound) ++failures;
    worst_ratio = std::max(worst_ratio, (rate - djk) / (bound - djk));

    // Violation iff c g < alpha.f - beta with g ~ N(mean, sd^2).
    const double z = ((row.alpha.dot(force) - row.beta) / row.grip_coeff - mean) / sd;
    const double below = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    worst_analytic = std::max(worst_analytic, std::abs((row.grip_coeff > 0.0 ? below : 1.0 - below) - djk) / djk);
    pooled_bad += static_cast<double>(bad);
    pooled_mean += static_cast<double>(n) * djk;
    pooled_var += static_cast<double>(n) * djk * (1.0 - djk);
  }
  return {failures == 0, std::to_string(failures) + " of 1000 constraints above the bound (worst (rate - Djk) / (3 sd) " +
                             fmt("%.3f", worst_ratio) + "); analytic rate vs Djk max rel error " +
                             fmt("%.1e", worst_analytic) + "; pooled z " +
                             fmt("%.2f", (pooled_bad - pooled_mean) / std::sqrt(pooled_var))};
}

Outcome plan_audit() {
  Outcome o;
  std::ostringstream d;
  double total = 0.0;
  for (double delta : {scenario_delta("nonuniform_walls"), 0.1}) {
    const auto& g = golden("nonuniform_walls", delta);
    const auto t0 = Clock::now();
    d << "Delta=" << delta << ": ";
    if (g.result.status != nlp::Status::Converged) {
      o.pass = false;
      d << nlp::to_string(g.result.status) << "; ";
      continue;
    }
    const auto r = validator::audit(g.result.trajectory, g.sc.problem);
    const double t = g.solve_s + seconds_since(t0);
    total = std::max(total, t);
    const bool ok = r.force_residual <= 1e-6 && r.moment_residual <= 1e-6 && r.min_cone_margin >= -1e-6 &&
                    r.min_torque_margin >= -1e-6 && r.fk_residual <= 1e-6 && t < 300.0;
    o.pass = o.pass && ok;
    d << "force " << fmt("%.1e", r.force_residual) << " moment " << fmt("%.1e", r.moment_residual) << " cone "
      << fmt("%.2e", r.min_cone_margin) << " torque " << fmt("%.2e", r.min_torque_margin) << " fk "
      << fmt("%.1e", r.fk_residual) << " findings " << r.findings.size() << " (" << fmt("%.0f", t) << " s); ";
  }
  o.detail = d.str();
  o.seconds = total;
  return o;
}

Outcome energy_direction() {
  const auto& lo = golden("energy_sweep", 0.0005);
  const auto& hi = golden("energy_sweep", 0.1);
  Outcome o;
  o.seconds = lo.solve_s + hi.solve_s;
  if (lo.result.status != nlp::Status::Converged || hi.result.status != nlp::Status::Converged) {
    return {false, std::string("status ") + nlp::to_string(lo.result.status) + " / " + nlp::to_string(hi.result.status), o.seconds};
  }
  const double e_lo = planner::energy_proxy(lo.result.trajectory).force;
  const double e_hi = planner::energy_proxy(hi.result.trajectory).force;
  o.pass = e_lo >= 1.10 * e_hi;
  o.detail = "E(0.0005) " + fmt("%.1f", e_lo) + ", E(0.1) " + fmt("%.1f", e_hi) + ", ratio " + fmt("%.3f", e_lo / e_hi);
  return o;
}

// Margins of a contact with the friction term removed: only the gripping
// force holds the shear.
double grip_only_margin(const planner::ContactState& c, const gp::GPModel& model, double delta_jk) {
  const auto stats = planner::grip_stats(model, {c.grip_angles[0], c.grip_angles[1], c.grip_angles[2], 0.0});
  const auto rows = risk::friction_cone(c.frame, 0.0);
  double m = -rows[0].residual(c.force, 0.0);
  for (int k = 1; k < risk::kConeRows; ++k) {
    m = std::min(m, -risk::reformulate(rows[static_cast<std::size_t>(k)], stats.mean, stats.variance, delta_jk)
                         .residual(c.force));
  }
  return m;
}

Outcome friction_zones() {
  const auto& safe = golden("nonuniform_walls", 0.001);
  const auto& risky = golden("nonuniform_walls", 0.1);
  Outcome o;
  o.seconds = safe.solve_s + risky.solve_s;
  if (safe.result.status != nlp::Status::Converged || risky.result.status != nlp::Status::Converged) {
    return {false, std::string("status ") + nlp::to_string(safe.result.status) + " / " + nlp::to_string(risky.result.status),
            o.seconds};
  }
  auto lambdas = [](const Golden& g) {
    std::vector<double> out;
    const auto& p = g.sc.problem;
    for (std::size_t r = 1; r < g.result.trajectory.footholds.size(); ++r)
      for (std::size_t i = 0; i < g.result.trajectory.footholds[r].size(); ++i)
        out.push_back(p.terrain.walls[static_cast<std::size_t>(p.limb_wall[i])].friction_at(
            g.result.trajectory.footholds[r][i]));
    return out;
  };
  const auto ls = lambdas(safe), lr = lambdas(risky);
  const double min_safe = *std::min_element(ls.begin(), ls.end());
  const double min_risky = *std::min_element(lr.begin(), lr.end());
  int low_risky = 0;
  for (double l : lr) low_risky += l <= 1.1 + 0.05;

  int slippery = 0;
  double worst_grip_margin = std::numeric_limits<double>::infinity();
  for (const Golden* g : {&safe, &risky}) {
    for (const auto& inst : g->result.trajectory.instants)
      for (const auto& c : inst.limbs) {
        if (!c.contact || c.lambda > 0.05) continue;
        ++slippery;
        worst_grip_margin = std::min(
            worst_grip_margin, grip_only_margin(c, *g->sc.problem.gp, g->result.trajectory.budget.delta_jk));
      }
  }
  o.pass = min_safe >= 2.3 - 0.05 && low_risky >= 1 && (slippery == 0 || worst_grip_margin >= -1e-6);
  o.detail = "Delta=0.001 min lambda " + fmt("%.3f", min_safe) + "; Delta=0.1 min lambda " + fmt("%.3f", min_risky) +
             " with " + std::to_string(low_risky) + " footholds at lambda <= 1.15; contacts at lambda <= 0.05: " +
             std::to_string(slippery);
  if (slippery > 0) o.detail += " (worst grip-only margin " + fmt("%.2e", worst_grip_margin) + ")";
  return o;
}

Outcome tripod_flip() {
  Outcome o;
  std::ostringstream d;
  bool seen_converged = false, monotone = true;
  double total = 0.0;
  for (double delta : {0.0, 0.01, 0.1, 0.4}) {
    const auto& g = golden("tripod_flip", delta);
    total += g.solve_s;
    const bool conv = g.result.status == nlp::Status::Converged;
    if (seen_converged && !conv) monotone = false;
    seen_converged = seen_converged || conv;
    d << "Delta=" << delta << " " << nlp::to_string(g.result.status) << (g.result.zero_risk ? " (ZeroRisk)" : "")
      << "; ";
  }
  const auto& zero = golden("tripod_flip", 0.0);
  const auto& top = golden("tripod_flip", 0.4);
  o.pass = zero.result.status == nlp::Status::Infeasible && zero.result.zero_risk &&
           top.result.status == nlp::Status::Converged && monotone && total < 600.0;
  o.detail = d.str() + (monotone ? "monotone" : "NOT monotone");
  o.seconds = total;
  return o;
}

Outcome certification() {
  Outcome o;
  std::ostringstream d;
  double slowest = 0.0;
  for (const auto& [name, delta] : golden_plans()) {
    const auto& g = golden(name, delta);
    if (g.result.status != nlp::Status::Converged) continue;
    const auto t0 = Clock::now();
    const auto rep = validator::certify(g.result.trajectory, *g.sc.problem.gp, 100000, g.sc.validation.seed);
    const double t = seconds_since(t0);
    slowest = std::max(slowest, t);
    const double bound = delta + 3.0 * std::sqrt(delta / 1e5);
    const bool ok = rep.joint_rate <= bound && t < 120.0;
    o.pass = o.pass && ok;
    d << name << "@" << delta << " " << fmt("%.2e", rep.joint_rate) << (ok ? " <= " : " > ") << fmt("%.2e", bound)
      << "; ";
  }
  o.detail = d.str() + "slowest certify " + fmt("%.1f", slowest) + " s";
  o.seconds = slowest;
  return o;
}

Outcome deflection() {
  Outcome o;
  double worst_res = 0.0, worst_ratio = 0.0;
  int plans = 0;
  std::string errors;
  for (const auto& [name, delta] : golden_plans()) {
    const auto& g = golden(name, delta);
    if (g.result.status != nlp::Status::Converged) continue;
    ++plans;
    const double th = g.sc.validation.deflection_threshold;
    try {
      const auto d = planner::solve_deflection(g.result.trajectory, g.sc.problem.robot, th);
      worst_res = std::max(worst_res, d.max_residual);
      worst_ratio = std::max(worst_ratio, d.max_wall_norm / th);
    } catch (const DeflectionBoundExceeded& e) {
      o.pass = false;
      errors += " " + name + "@" + fmt("%g", delta) + ": " + e.what();
    }
  }
  o.pass = o.pass && worst_res <= 1e-8 && worst_ratio <= 1.0;
  o.detail = std::to_string(plans) + " plans, max residual " + fmt("%.2e", worst_res) + " N, max |delta_wall| / threshold " +
             fmt("%.3f", worst_ratio) + errors;
  return o;
}

Outcome derivatives() {
  Outcome o;
  std::ostringstream d;
  for (const char* name : {"nonuniform_walls", "energy_sweep", "tripod_flip"}) {
    const auto sc = testutil::build(testutil::scenario_json(name));
    const planner::Assembly a(sc.problem);
    const auto c = nlp::check_derivatives(a.nlp(), a.nlp().x0);
    o.pass = o.pass && c.max_error <= 1e-4;
    d << name << " " << fmt("%.2e", c.max_error) << "; ";
  }
  o.detail = d.str();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* name;
    double limit_s;  ///< 0 means no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"GP oracle equivalence", 5.0, gp_oracle},
      {"inverse normal CDF accuracy", 5.0, inverse_cdf},
      {"reformulation soundness", 60.0, reformulation_soundness},
      {"converged-plan audit (nonuniform_walls)", 300.0, plan_audit},
      {"energy-vs-risk direction (energy_sweep)", 600.0, energy_direction},
      {"friction-zone behavior (nonuniform_walls)", 900.0, friction_zones},
      {"tripod feasibility flip", 600.0, tripod_flip},
      {"Monte-Carlo certification of golden plans", 120.0, certification},
      {"deflection replay", 0.0, deflection},
      {"derivative hygiene", 0.0, derivatives},
  };
  std::vector<std::string> lines;
  int failed = 0;
  std::vector<bool> selected(criteria.size(), argc < 2);
  for (int a = 1; a < argc; ++a) {
    const auto k = static_cast<std::size_t>(std::atoi(argv[a]));
    if (k >= 1 && k <= criteria.size()) selected[k - 1] = true;
  }
  int ran = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!selected[k]) continue;
    ++ran;
    const auto& c = criteria[k];
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double t = o.seconds >= 0.0 ? o.seconds : seconds_since(t0);
    const bool in_time = c.limit_s <= 0.0 || t < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::ostringstream line;
    line << (pass ? "PASS" : "FAIL") << "  [" << k + 1 << "] " << c.name << ": " << o.detail << " (" << fmt("%.1f", t)
         << " s";
    if (c.limit_s > 0.0) line << ", limit " << fmt("%.0f", c.limit_s) << " s";
    line << ")";
    std::printf("%s\n", line.str().c_str());
    std::fflush(stdout);
    lines.push_back(line.str());
  }
  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed;
}
