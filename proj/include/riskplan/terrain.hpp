#pragma once

// Wall planes, convex contact regions and the friction coefficient field.

#include <Eigen/Core>
#include <string>
#include <vector>

#include "riskplan/robot_model.hpp"

namespace riskplan::terrain {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Rectangle in wall coordinates (u, v) carrying its own friction value.
struct FrictionPatch {
  double u_min = 0.0;
  double u_max = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
  double lambda = 0.0;
};

/// C1 ramp from 0 to 1 built from two parabolas; t is clamped to [0, 1].
double parabola_ramp(double t);
double parabola_ramp_derivative(double t);

/// Half-plane c . (u, v) <= d with unit |c|.
struct HalfPlane {
  Vec2 c = Vec2::Zero();
  double d = 0.0;
};

/// A planar wall. Coordinates on it are u = xi . (p - origin) and
/// v = zeta . (p - origin), with zeta the upward tangent.
struct Wall {
  std::string name;
  Vec3 origin = Vec3::Zero();
  robot::ContactFrame frame;
  std::vector<Vec2> region;  ///< convex polygon, counter-clockwise in (u, v)
  double base_lambda = 2.3;
  std::vector<FrictionPatch> patches;  ///< blended in order over the base value
  double ramp_width = 0.05;            ///< m

  void validate() const;
  Vec2 to_plane(const Vec3& p) const;
  Vec3 from_plane(const Vec2& uv) const;
  double normal_offset(const Vec3& p) const { return frame.n.dot(p - origin); }

  double friction(const Vec2& uv) const;
  /// Friction and its gradient with respect to (u, v).
  double friction(const Vec2& uv, Vec2& gradient) const;
  double friction_at(const Vec3& p) const { return friction(to_plane(p)); }

  /// Region as half-planes; one per polygon edge.
  std::vector<HalfPlane> half_planes() const;
  /// Largest signed edge distance; <= 0 inside the region.
  double region_violation(const Vec2& uv) const;
};

struct TerrainMap {
  std::vector<Wall> walls;

  void validate() const;
  /// Two parallel vertical walls at y = -gap/2 (index 0, normal +y) and
  /// y = +gap/2 (index 1, normal -y). Regions span |x| <= half_length and
  /// z in [z_min, z_max].
  static TerrainMap parallel_walls(double gap, double base_lambda, double half_length, double z_min, double z_max);
};

}  // namespace riskplan::terrain
