#include "riskplan/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riskplan/errors.hpp"

namespace riskplan::terrain {

double parabola_ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t < 0.5 ? 2.0 * t * t : 1.0 - 2.0 * (1.0 - t) * (1.0 - t);
}

double parabola_ramp_derivative(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return t < 0.5 ? 4.0 * t : 4.0 * (1.0 - t);
}

void Wall::validate() const {
  frame.validate();
  if (region.size() < 3) throw InvalidInput("wall " + name + ": region needs at least 3 vertices");
  const std::size_t m = region.size();
  for (std::size_t k = 0; k < m; ++k) {
    const Vec2 e1 = region[(k + 1) % m] - region[k];
    const Vec2 e2 = region[(k + 2) % m] - region[(k + 1) % m];
    if (e1.norm() == 0.0) throw InvalidInput("wall " + name + ": repeated region vertex");
    if (e1.x() * e2.y() - e1.y() * e2.x() <= 0.0) {
      throw InvalidInput("wall " + name + ": region must be convex and counter-clockwise");
    }
  }
  if (!(base_lambda >= 0.0)) throw InvalidInput("wall " + name + ": friction must be >= 0");
  if (!(ramp_width > 0.0)) throw InvalidInput("wall " + name + ": ramp width must be > 0");
  for (const auto& p : patches) {
    if (!(p.lambda >= 0.0)) throw InvalidInput("wall " + name + ": patch friction must be >= 0");
    if (!(p.u_min < p.u_max && p.v_min < p.v_max)) throw InvalidInput("wall " + name + ": empty patch");
  }
}

Vec2 Wall::to_plane(const Vec3& p) const {
  const Vec3 d = p - origin;
  return {frame.xi.dot(d), frame.zeta.dot(d)};
}

Vec3 Wall::from_plane(const Vec2& uv) const { return origin + uv.x() * frame.xi + uv.y() * frame.zeta; }

double Wall::friction(const Vec2& uv) const {
  Vec2 g;
  return friction(uv, g);
}

double Wall::friction(const Vec2& uv, Vec2& gradient) const {
  double lam = base_lambda;
  gradient.setZero();
  for (const auto& p : patches) {
    const double t[4] = {(uv.x() - p.u_min) / ramp_width + 0.5, (p.u_max - uv.x()) / ramp_width + 0.5,
                         (uv.y() - p.v_min) / ramp_width + 0.5, (p.v_max - uv.y()) / ramp_width + 0.5};
    double s[4], ds[4];
    for (int k = 0; k < 4; ++k) {
      s[k] = parabola_ramp(t[k]);
      ds[k] = parabola_ramp_derivative(t[k]) / ramp_width;
    }
    const double w = s[0] * s[1] * s[2] * s[3];
    const Vec2 dw(s[2] * s[3] * (ds[0] * s[1] - s[0] * ds[1]), s[0] * s[1] * (ds[2] * s[3] - s[2] * ds[3]));
    gradient = gradient * (1.0 - w) + (p.lambda - lam) * dw;
    lam = lam * (1.0 - w) + p.lambda * w;
  }
  return lam;
}

std::vector<HalfPlane> Wall::half_planes() const {
  std::vector<HalfPlane> out;
  const std::size_t m = region.size();
  for (std::size_t k = 0; k < m; ++k) {
    const Vec2 e = region[(k + 1) % m] - region[k];
    const Vec2 c = Vec2(e.y(), -e.x()).normalized();
    out.push_back({c, c.dot(region[k])});
  }
  return out;
}

double Wall::region_violation(const Vec2& uv) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& h : half_planes()) worst = std::max(worst, h.c.dot(uv) - h.d);
  return worst;
}

void TerrainMap::validate() const {
  if (walls.empty()) throw InvalidInput("terrain: no walls");
  for (const auto& w : walls) w.validate();
}

TerrainMap TerrainMap::parallel_walls(double gap, double base_lambda, double half_length, double z_min,
                                      double z_max) {
  if (!(gap > 0.0 && half_length > 0.0 && z_min < z_max)) throw InvalidInput("terrain: invalid wall geometry");
  TerrainMap map;
  for (int side = 0; side < 2; ++side) {
    Wall w;
    w.name = side == 0 ? "right" : "left";
    const double sign = side == 0 ? -1.0 : 1.0;
    w.origin = Vec3(0.0, sign * gap / 2.0, 0.0);
    w.frame = robot::ContactFrame::from_normal(Vec3(0.0, -sign, 0.0), Vec3::UnitZ());
    w.base_lambda = base_lambda;
    // u runs along +x on the right wall and -x on the left wall.
    w.region = {{-half_length, z_min}, {half_length, z_min}, {half_length, z_max}, {-half_length, z_max}};
    map.walls.push_back(std::move(w));
  }
  return map;
}

}  // namespace riskplan::terrain
