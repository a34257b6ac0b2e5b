#include <doctest.h>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <cmath>
#include <map>

#include "riskplan/errors.hpp"
#include "riskplan/planner.hpp"
#include "scenario_fixture.hpp"

using namespace riskplan;
using namespace riskplan::planner;

namespace {

const PlanResult& tripod_plan(double delta) {
  static std::map<double, PlanResult> cache;
  auto it = cache.find(delta);
  if (it == cache.end()) {
    auto doc = testutil::scenario_json("tripod_flip");
    doc["risk"]["delta"] = delta;
    const auto sc = testutil::build(doc);
    it = cache.emplace(delta, plan(sc.problem, sc.plan_options)).first;
  }
  return it->second;
}

scenario::Scenario tripod_scenario(double delta) {
  auto doc = testutil::scenario_json("tripod_flip");
  doc["risk"]["delta"] = delta;
  return testutil::build(doc);
}

// Checks the plan invariants with evaluation code local to this test.
void check_plan_invariants(const Trajectory& traj, const PlanProblem& p) {
  for (const auto& inst : traj.instants) {
    Vec3 fsum = p.robot.gravity_force();
    Vec3 msum = Vec3::Zero();
    for (std::size_t i = 0; i < inst.limbs.size(); ++i) {
      const auto& c = inst.limbs[i];
      if (!c.contact) {
        CHECK(c.force.isZero(0.0));
        continue;
      }
      fsum += c.force;
      msum += (c.foot - inst.pose.position).cross(c.force);
      const Vec3 fk = robot::forward_kinematics(p.robot, inst.pose, c.theta, static_cast<int>(i)).position;
      CHECK((fk - c.foot).cwiseAbs().maxCoeff() <= 1e-6);
      const Mat3 to_base = (inst.pose.rotation() * p.robot.limbs[i].mount_rotation).transpose();
      const double tau = robot::joint_torque(p.robot, c.theta, static_cast<int>(i), to_base * c.force).norm();
      CHECK(tau <= p.robot.limbs[i].torque_limit + 1e-6);
      for (double m : c.cone_margin) CHECK(m >= -1e-6);
      const auto& wall = p.terrain.walls[static_cast<std::size_t>(p.limb_wall[i])];
      CHECK(wall.region_violation(wall.to_plane(c.foot)) <= 1e-8);
    }
    CHECK(fsum.cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(msum.cwiseAbs().maxCoeff() <= 1e-6);
  }
}

}  // namespace

TEST_CASE("layout counts match the closed form") {
  for (int rounds : {1, 2}) {
    auto doc = testutil::scenario_json("energy_sweep");
    doc["gait"]["rounds"] = rounds;
    const auto sc = testutil::build(doc);
    const int n = rounds, l = 6, h = 3, e = 4, t = 2 * l;
    const int c = n * (l * (l - 1) + l * l);
    const auto got = Layout::count(sc.problem);
    CHECK(got.n_contacts == c);
    CHECK(got.n_vars == 3 * n * l + 6 * n * t + c * (h + 3));
    CHECK(got.n_eq == 3 * c + 6 * n * t + n * l);
    CHECK(got.n_ineq == 6 * c + 12 * n * t + n * l * e + 6 * n * l);
    if (rounds == 1) {
      CHECK(got.n_vars == 486);
      CHECK(got.n_eq == 276);
      CHECK(got.n_ineq == 600);
    }
    const Assembly a(sc.problem);
    CHECK(a.layout().n_vars == got.n_vars);
    CHECK(a.layout().n_eq == got.n_eq);
    CHECK(a.layout().n_ineq == got.n_ineq);
    CHECK(a.nlp().n_vars == got.n_vars);
    CHECK(a.nlp().n_eq == got.n_eq);
    CHECK(a.nlp().n_ineq == got.n_ineq);
  }
  const auto tri = tripod_scenario(0.4);
  const int c = 3 + 6 + 3 + 6;
  const auto got = Layout::count(tri.problem);
  CHECK(tri.problem.gait.instants_per_round() == 4);
  CHECK(got.n_vars == 3 * 6 + 6 * 4 + c * 6);
  CHECK(got.n_eq == 3 * c + 6 * 4 + 6);
  CHECK(got.n_ineq == 6 * c + 12 * 4 + 6 * 4 + 6 * 6);
}

TEST_CASE("evaluator is finite with consistent shapes at the initial point") {
  const auto sc = tripod_scenario(0.4);
  const Assembly a(sc.problem);
  const auto& p = a.nlp();
  CHECK_NOTHROW(p.validate());
  nlp::Evaluation e;
  p.evaluate(p.x0, true, e);
  CHECK(std::isfinite(e.objective));
  CHECK(e.gradient.size() == p.n_vars);
  CHECK(e.eq.size() == p.n_eq);
  CHECK(e.ineq.size() == p.n_ineq);
  CHECK(e.eq_jac.rows() == p.n_eq);
  CHECK(e.eq_jac.cols() == p.n_vars);
  CHECK(e.ineq_jac.rows() == p.n_ineq);
  CHECK(e.ineq_jac.cols() == p.n_vars);
  CHECK(e.eq.allFinite());
  CHECK(e.ineq.allFinite());
}

TEST_CASE("assembled derivatives agree with finite differences") {
  for (const char* name : {"tripod_flip", "energy_sweep"}) {
    const auto sc = testutil::build(testutil::scenario_json(name));
    const Assembly a(sc.problem);
    const auto check = nlp::check_derivatives(a.nlp(), a.nlp().x0);
    INFO(name << ": " << check.where);
    CHECK(check.max_error <= 1e-4);
  }
}

TEST_CASE("zero risk is infeasible without solving") {
  const auto sc = tripod_scenario(0.0);
  CHECK_THROWS_AS(Assembly(sc.problem), ZeroRisk);
  const auto r = plan(sc.problem);
  CHECK(r.status == nlp::Status::Infeasible);
  CHECK(r.zero_risk);
  CHECK(r.reason.find("ZeroRisk") != std::string::npos);
  CHECK(r.report.inner_iterations == 0);
}

TEST_CASE("converged tripod plan satisfies every constraint family") {
  const auto sc = tripod_scenario(0.4);
  const auto& r = tripod_plan(0.4);
  REQUIRE(r.status == nlp::Status::Converged);
  check_plan_invariants(r.trajectory, sc.problem);
  CHECK(r.report.complementarity <= 1e-4);
  CHECK(r.trajectory.budget.delta_jk == doctest::Approx(0.4 / (4.0 * 18)));
  CHECK(r.trajectory.footholds.size() == 2);
}

TEST_CASE("a solution at smaller risk is feasible at larger risk") {
  const auto& lo = tripod_plan(0.1);
  REQUIRE(lo.status == nlp::Status::Converged);
  const auto hi = tripod_scenario(0.4);
  const Assembly a(hi.problem);
  nlp::Evaluation e;
  a.nlp().evaluate(lo.report.x, false, e);
  CHECK(e.eq.cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(e.ineq.maxCoeff() <= 1e-6);
  CHECK(lo.trajectory.quantile > tripod_plan(0.4).trajectory.quantile);
}

TEST_CASE("frictionless walls with zero-mean grip are infeasible") {
  auto doc = testutil::scenario_json("tripod_flip");
  doc["terrain"]["base_lambda"] = 0.0;
  doc["gp"] = {{"synthetic", {{"seed", 1}, {"repeats", 1}, {"c0", 0.0}, {"noise_std", 0.0}}}, {"optimize", false}};
  doc["risk"]["delta"] = 0.4;
  const auto sc = testutil::build(doc);
  const auto r = plan(sc.problem, sc.plan_options);
  CHECK(r.status == nlp::Status::Infeasible);
}

TEST_CASE("climbing straight up reduces the terminal distance") {
  auto doc = testutil::scenario_json("tripod_flip");
  doc["destination"]["shift"] = {0.0, 0.0, 0.3};
  const auto sc = testutil::build(doc);
  const auto r = plan(sc.problem, sc.plan_options);
  REQUIRE(r.status == nlp::Status::Converged);
  const auto& final_pose = r.trajectory.instants.back().pose;
  const Vec3 goal = sc.problem.destination_pose.position;
  const Vec3 start = sc.problem.start.pose.position;
  CHECK((final_pose.position - goal).norm() <= (start - goal).norm());
  CHECK(final_pose.position.z() - start.z() <= sc.problem.bounds.body_position + 1e-6);
  CHECK(final_pose.position.z() - start.z() >= sc.problem.bounds.body_position - 1e-3);
  check_plan_invariants(r.trajectory, sc.problem);
}

TEST_CASE("energy proxy arithmetic") {
  Trajectory t;
  InstantState inst;
  inst.limbs.resize(3);
  for (auto& c : inst.limbs) c.torque = Eigen::VectorXd::Zero(3);
  inst.limbs[0].contact = inst.limbs[1].contact = true;
  t.instants.push_back(inst);
  CHECK(energy_proxy(t).force == 0.0);
  t.instants[0].limbs[0].force = Vec3(6, 8, 0);
  t.instants[0].limbs[1].force = Vec3(0, 0, 10);
  t.instants[0].limbs[2].force = Vec3(100, 0, 0);
  t.instants[0].limbs[0].torque = Eigen::Vector3d(1, 2, 2);
  CHECK(energy_proxy(t).force == doctest::Approx(200.0));
  CHECK(energy_proxy(t).torque == doctest::Approx(9.0));
}

TEST_CASE("deflection closed forms") {
  const auto robot = robot::RobotModel::default_hexapod();
  const Eigen::Vector3d theta(0.1, 0.5, 1.3);
  Trajectory t;
  InstantState inst;
  inst.limbs.resize(6);
  for (auto& c : inst.limbs) c.theta = theta;
  inst.limbs[0].contact = inst.limbs[3].contact = true;
  const Mat3 k0 = world_stiffness(robot, inst.pose, theta, 0);
  const Mat3 k3 = world_stiffness(robot, inst.pose, theta, 3);
  const double s = 0.004;
  inst.limbs[0].force = k0 * Vec3(0, s, 0);
  inst.limbs[3].force = k3 * Vec3(0, -s, 0);
  t.instants.push_back(inst);

  SUBCASE("pinned body gives K inverse f") {
    const auto d = solve_deflection(t, robot, 0.02, true);
    REQUIRE(d.instants.size() == 1);
    CHECK(d.instants[0].delta_com.isZero(0.0));
    CHECK((d.instants[0].delta_wall[0] - k0.lu().solve(inst.limbs[0].force)).norm() <= 1e-12);
  }
  SUBCASE("symmetric squeeze leaves the body in place") {
    const auto d = solve_deflection(t, robot);
    CHECK(d.instants[0].delta_com.norm() <= 1e-12);
    CHECK(d.max_residual <= 1e-8);
  }
  SUBCASE("unreachable bound throws") {
    Trajectory big = t;
    big.instants[0].limbs[0].force *= 50.0;
    big.instants[0].limbs[3].force *= 1.0;
    CHECK_THROWS_AS(solve_deflection(big, robot, 0.02), DeflectionBoundExceeded);
  }
}

TEST_CASE("deflection replay of a converged plan") {
  const auto sc = tripod_scenario(0.4);
  const auto& r = tripod_plan(0.4);
  REQUIRE(r.status == nlp::Status::Converged);
  const double th = sc.validation.deflection_threshold;
  const auto d = solve_deflection(r.trajectory, sc.problem.robot, th);
  CHECK(d.max_residual <= 1e-8);
  for (std::size_t t = 0; t < d.instants.size(); ++t) {
    const auto& di = d.instants[t];
    const auto& inst = r.trajectory.instants[t];
    for (std::size_t k = 0; k < di.limbs.size(); ++k) {
      const int i = di.limbs[k];
      CHECK(di.delta_wall[k].norm() <= th + 1e-12);
      const Mat3 kw = world_stiffness(sc.problem.robot, inst.pose, inst.limbs[i].theta, i);
      CHECK((inst.limbs[i].force - kw * (di.delta_wall[k] - di.delta_com)).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}
