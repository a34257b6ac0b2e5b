#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "riskplan/errors.hpp"
#include "riskplan/planner.hpp"

namespace riskplan::planner {

namespace {

/// Dykstra's alternating projections of `start` onto the intersection of
/// balls |d + c_i| <= r. Returns false when the iteration does not reach a
/// common point.
bool project_onto_balls(const std::vector<Vec3>& c, double r, Vec3 start, Vec3& out) {
  const std::size_t m = c.size();
  std::vector<Vec3> incr(m, Vec3::Zero());
  Vec3 d = start;
  for (int it = 0; it < 20000; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      const Vec3 y = d + incr[i];
      const Vec3 centre = -c[i];
      const Vec3 off = y - centre;
      const double n = off.norm();
      const Vec3 proj = n > r ? Vec3(centre + off * (r / n)) : y;
      incr[i] = y - proj;
      d = proj;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, (d + c[i]).norm() - r);
    if (worst <= 1e-12 && it > 0) {
      out = d;
      return true;
    }
  }
  out = d;
  return false;
}

}  // namespace

DeflectionSolution solve_deflection(const Trajectory& traj, const robot::RobotModel& robot, double threshold,
                                    bool fix_com_zero) {
  if (!(threshold > 0.0)) throw InvalidInput("deflection threshold must be > 0");
  DeflectionSolution sol;
  for (std::size_t t = 0; t < traj.instants.size(); ++t) {
    const auto& inst = traj.instants[t];
    InstantDeflection d;
    std::vector<Mat3> stiff;
    std::vector<Vec3> comp;
    for (std::size_t i = 0; i < inst.limbs.size(); ++i) {
      const auto& cs = inst.limbs[i];
      if (!cs.contact) continue;
      const Mat3 k = world_stiffness(robot, inst.pose, cs.theta, static_cast<int>(i));
      d.limbs.push_back(static_cast<int>(i));
      stiff.push_back(k);
      comp.push_back(k.ldlt().solve(cs.force));
    }
    Vec3 com = Vec3::Zero();
    if (!fix_com_zero && !comp.empty()) {
      for (const auto& c : comp) com -= c;
      com /= static_cast<double>(comp.size());
      double worst = 0.0;
      for (const auto& c : comp) worst = std::max(worst, (c + com).norm());
      if (worst > threshold) {
        Vec3 projected;
        if (!project_onto_balls(comp, threshold, com, projected)) {
          std::size_t bad = 0;
          double bad_norm = 0.0;
          for (std::size_t k = 0; k < comp.size(); ++k) {
            const double nrm = (comp[k] + projected).norm();
            if (nrm > bad_norm) {
              bad_norm = nrm;
              bad = k;
            }
          }
          throw DeflectionBoundExceeded("no body deflection keeps every wall deflection within the bound",
                                        static_cast<int>(t), d.limbs[bad], bad_norm);
        }
        com = projected;
      }
    }
    for (std::size_t k = 0; k < comp.size(); ++k) {
      const Vec3 wall = comp[k] + com;
      if (wall.norm() > threshold * (1.0 + 1e-9)) {
        throw DeflectionBoundExceeded("wall deflection exceeds the bound", static_cast<int>(t), d.limbs[k], wall.norm());
      }
      d.delta_wall.push_back(wall);
      const Vec3 f = inst.limbs[static_cast<std::size_t>(d.limbs[k])].force;
      d.residual = std::max(d.residual, (f - stiff[k] * (wall - com)).cwiseAbs().maxCoeff());
      sol.max_wall_norm = std::max(sol.max_wall_norm, wall.norm());
    }
    d.delta_com = com;
    sol.max_residual = std::max(sol.max_residual, d.residual);
    sol.instants.push_back(std::move(d));
  }
  return sol;
}

}  // namespace riskplan::planner
