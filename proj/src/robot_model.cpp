#include "riskplan/robot_model.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "riskplan/errors.hpp"

namespace riskplan::robot {

namespace {

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}
Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}
Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}
Mat3 drot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return r;
}
Mat3 drot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return r;
}
Mat3 drot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return r;
}

void check_theta(const LimbChain& limb, const Eigen::VectorXd& theta) {
  if (theta.size() != limb.dof()) {
    throw InvalidInput("limb " + limb.name + ": joint vector has " + std::to_string(theta.size()) +
                       " entries, expected " + std::to_string(limb.dof()));
  }
}

}  // namespace

Mat3 axis_rotation(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Mat3 rotation_rpy(const Vec3& rpy) { return rot_z(rpy[2]) * rot_y(rpy[1]) * rot_x(rpy[0]); }

std::array<Mat3, 3> rotation_rpy_derivatives(const Vec3& rpy) {
  const Mat3 rx = rot_x(rpy[0]), ry = rot_y(rpy[1]), rz = rot_z(rpy[2]);
  return {rz * ry * drot_x(rpy[0]), rz * drot_y(rpy[1]) * rx, drot_z(rpy[2]) * ry * rx};
}

Vec3 rpy_from_rotation(const Mat3& r) {
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double pitch = std::atan2(-r(2, 0), std::hypot(r(2, 1), r(2, 2)));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

void LimbChain::validate() const {
  const auto h = joint_axes.size();
  if (h < 1) throw InvalidInput("limb " + name + ": needs at least one joint");
  if (link_lengths.size() != h || joint_stiffness.size() != h) {
    throw InvalidInput("limb " + name + ": axes, link lengths and stiffnesses must have equal length");
  }
  for (double l : link_lengths) {
    if (!(l > 0.0)) throw InvalidInput("limb " + name + ": link lengths must be > 0");
  }
  for (double k : joint_stiffness) {
    if (!(k > 0.0)) throw InvalidInput("limb " + name + ": joint stiffness must be > 0");
  }
  for (const auto& a : joint_axes) {
    if (!(a.norm() > 0.0)) throw InvalidInput("limb " + name + ": joint axis must be nonzero");
  }
  if (!(torque_limit > 0.0)) throw InvalidInput("limb " + name + ": torque limit must be > 0");
  if (!joint_lower.empty() || !joint_upper.empty()) {
    if (joint_lower.size() != h || joint_upper.size() != h) {
      throw InvalidInput("limb " + name + ": joint limits must cover every joint");
    }
    for (std::size_t i = 0; i < h; ++i) {
      if (!(joint_lower[i] < joint_upper[i])) throw InvalidInput("limb " + name + ": joint lower >= upper");
    }
  }
  if ((mount_rotation.transpose() * mount_rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw InvalidInput("limb " + name + ": mount rotation is not orthonormal");
  }
}

void RobotModel::validate() const {
  if (limbs.size() < 2) throw InvalidInput("robot: needs at least two limbs");
  if (!(mass > 0.0)) throw InvalidInput("robot: mass must be > 0");
  for (const auto& l : limbs) l.validate();
}

RobotModel RobotModel::default_hexapod() {
  RobotModel robot;
  robot.name = "hexapod";
  robot.mass = 11.5;
  robot.body_width = 0.442;
  robot.body_height = 0.18;
  const double half_width = robot.body_width / 2.0;
  const std::array<double, 3> xs{0.2, 0.0, -0.2};
  const std::array<const char*, 6> names{"right_front", "right_middle", "right_hind",
                                         "left_front",  "left_middle",  "left_hind"};
  for (int side = 0; side < 2; ++side) {
    const double y = side == 0 ? -half_width : half_width;
    const double yaw = side == 0 ? -std::numbers::pi / 2.0 : std::numbers::pi / 2.0;
    for (int k = 0; k < 3; ++k) {
      LimbChain limb;
      limb.name = names[static_cast<std::size_t>(side * 3 + k)];
      limb.mount_position = Vec3(xs[static_cast<std::size_t>(k)], y, 0.0);
      limb.mount_rotation = rot_z(yaw);
      limb.joint_axes = {Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitY()};
      limb.link_lengths = {0.06, 0.20, 0.20};
      limb.joint_stiffness = {300.0, 300.0, 300.0};
      limb.torque_limit = 27.0;
      limb.joint_lower = {-0.9, -1.4, 0.2};
      limb.joint_upper = {0.9, 1.2, 2.6};
      robot.limbs.push_back(std::move(limb));
    }
  }
  return robot;
}

ContactFrame ContactFrame::from_normal(const Vec3& normal, const Vec3& up) {
  ContactFrame f;
  f.n = normal.normalized();
  const Vec3 t = up - up.dot(f.n) * f.n;
  if (t.norm() < 1e-9) throw InvalidInput("ContactFrame: up hint is parallel to the normal");
  f.zeta = t.normalized();
  f.xi = f.n.cross(f.zeta);
  return f;
}

void ContactFrame::validate() const {
  const Mat3 m = matrix();
  if ((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10 || m.determinant() < 0.0 ||
      (n.cross(zeta) - xi).cwiseAbs().maxCoeff() > 1e-10) {
    throw InvalidInput("ContactFrame: {n, zeta, xi} must be an orthonormal right-handed triad");
  }
}

Mat3 ContactFrame::matrix() const {
  Mat3 m;
  m.col(0) = zeta;
  m.col(1) = xi;
  m.col(2) = n;
  return m;
}

ChainPose chain_fk(const LimbChain& limb, const Eigen::VectorXd& theta) {
  check_theta(limb, theta);
  ChainPose pose;
  for (int i = 0; i < limb.dof(); ++i) {
    pose.rotation = pose.rotation * axis_rotation(limb.joint_axes[static_cast<std::size_t>(i)], theta[i]);
    pose.position += pose.rotation * Vec3(limb.link_lengths[static_cast<std::size_t>(i)], 0.0, 0.0);
  }
  return pose;
}

Vec3 foot_in_body(const LimbChain& limb, const Eigen::VectorXd& theta) {
  return limb.mount_position + limb.mount_rotation * chain_fk(limb, theta).position;
}

FootState forward_kinematics(const RobotModel& robot, const BodyPose& pose, const Eigen::VectorXd& theta,
                             int limb) {
  const LimbChain& chain = robot.limbs.at(static_cast<std::size_t>(limb));
  const ChainPose tip = chain_fk(chain, theta);
  const Mat3 r_body = pose.rotation();
  FootState out;
  out.position = r_body * (chain.mount_position + chain.mount_rotation * tip.position) + pose.position;
  out.tip_rotation = r_body * chain.mount_rotation * tip.rotation;
  return out;
}

Mat3X jacobian(const LimbChain& limb, const Eigen::VectorXd& theta) {
  check_theta(limb, theta);
  const int h = limb.dof();
  std::vector<Vec3> origins(static_cast<std::size_t>(h));
  std::vector<Vec3> axes(static_cast<std::size_t>(h));
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
  for (int i = 0; i < h; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    origins[ui] = pos;
    axes[ui] = rot * limb.joint_axes[ui].normalized();
    rot = rot * axis_rotation(limb.joint_axes[ui], theta[i]);
    pos += rot * Vec3(limb.link_lengths[ui], 0.0, 0.0);
  }
  Mat3X j(3, h);
  for (int i = 0; i < h; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    j.col(i) = axes[ui].cross(pos - origins[ui]);
  }
  return j;
}

Mat3X jacobian(const RobotModel& robot, const Eigen::VectorXd& theta, int limb) {
  return jacobian(robot.limbs.at(static_cast<std::size_t>(limb)), theta);
}

int jacobian_rank(const Mat3X& j, double rtol) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > rtol * s[0]) ++rank;
  }
  return rank;
}

Mat3 stiffness(const Mat3X& j, const Eigen::VectorXd& joint_stiffness) {
  if (joint_stiffness.size() != j.cols()) throw InvalidInput("stiffness: k size must match Jacobian columns");
  if (!(joint_stiffness.array() > 0.0).all()) throw InvalidInput("stiffness: joint stiffness must be > 0");
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const auto& s = svd.singularValues();
  if (j.cols() < 3 || s.size() < 3 || !(s[2] > 0.0) || s[0] / s[2] > 1e8) {
    throw SingularJacobian("stiffness: Jacobian is singular or ill-conditioned (cond > 1e8)");
  }
  const Mat3 compliance = j * joint_stiffness.cwiseInverse().asDiagonal() * j.transpose();
  Mat3 k = compliance.inverse();
  return 0.5 * (k + k.transpose());
}

Mat3 stiffness(const RobotModel& robot, const Eigen::VectorXd& theta, int limb) {
  const LimbChain& chain = robot.limbs.at(static_cast<std::size_t>(limb));
  return stiffness(jacobian(chain, theta),
                   Eigen::Map<const Eigen::VectorXd>(chain.joint_stiffness.data(), chain.dof()));
}

Eigen::VectorXd joint_torque(const Mat3X& j, const Vec3& f) { return j.transpose() * f; }

Eigen::VectorXd joint_torque(const RobotModel& robot, const Eigen::VectorXd& theta, int limb, const Vec3& f_base) {
  return joint_torque(jacobian(robot, theta, limb), f_base);
}

Eigen::VectorXd inverse_kinematics(const LimbChain& limb, const Vec3& target_base, Eigen::VectorXd seed,
                                   int max_iter) {
  check_theta(limb, seed);
  const bool limited = !limb.joint_lower.empty();
  constexpr double damping = 1e-3;
  for (int it = 0; it < max_iter; ++it) {
    const Vec3 err = target_base - chain_fk(limb, seed).position;
    if (err.norm() < 1e-13) break;
    const Mat3X j = jacobian(limb, seed);
    const Mat3 jjt = j * j.transpose() + damping * damping * Mat3::Identity();
    Eigen::VectorXd step = j.transpose() * jjt.ldlt().solve(err);
    const double max_step = step.cwiseAbs().maxCoeff();
    if (max_step > 0.3) step *= 0.3 / max_step;
    seed += step;
    if (limited) {
      for (int i = 0; i < limb.dof(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        seed[i] = std::clamp(seed[i], limb.joint_lower[ui], limb.joint_upper[ui]);
      }
    }
  }
  return seed;
}

Vec3 gripper_angles(const Mat3& tip_rotation, const Mat3& reference_tip_rotation, const ContactFrame& frame) {
  const Mat3 c = frame.matrix();
  return rpy_from_rotation(c.transpose() * tip_rotation * reference_tip_rotation.transpose() * c);
}

}  // namespace riskplan::robot
