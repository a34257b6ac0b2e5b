#pragma once

// Kinematics, Jacobians, joint torques and virtual-joint stiffness of an
// L-limbed robot with H revolute joints per limb.

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

namespace riskplan::robot {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

inline constexpr double kGravity = 9.81;

Mat3 axis_rotation(const Vec3& axis, double angle);

/// R = Rz(yaw) Ry(pitch) Rx(roll), rpy = (roll, pitch, yaw). Maps body-frame
/// vectors to the world frame.
Mat3 rotation_rpy(const Vec3& rpy);
/// dR/droll, dR/dpitch, dR/dyaw.
std::array<Mat3, 3> rotation_rpy_derivatives(const Vec3& rpy);
/// Inverse of rotation_rpy away from |pitch| = 90 deg.
Vec3 rpy_from_rotation(const Mat3& r);

/// Serial chain mounted on the body. Joint i rotates about `joint_axes[i]`
/// (expressed in the frame after joint i-1), then link i extends along the
/// local x axis by `link_lengths[i]`.
struct LimbChain {
  std::string name;
  Vec3 mount_position = Vec3::Zero();
  Mat3 mount_rotation = Mat3::Identity();
  std::vector<Vec3> joint_axes;
  std::vector<double> link_lengths;       ///< m
  std::vector<double> joint_stiffness;    ///< N m / rad
  double torque_limit = 27.0;             ///< N m, bound on the 2-norm of the joint torques
  std::vector<double> joint_lower;        ///< rad
  std::vector<double> joint_upper;        ///< rad

  int dof() const { return static_cast<int>(joint_axes.size()); }
  void validate() const;
};

struct RobotModel {
  std::string name = "robot";
  std::vector<LimbChain> limbs;
  double mass = 11.5;          ///< kg
  double body_width = 0.442;   ///< m, reporting only
  double body_height = 0.18;   ///< m, reporting only

  int limb_count() const { return static_cast<int>(limbs.size()); }
  void validate() const;
  /// External force from gravity, (0, 0, -m g).
  Vec3 gravity_force() const { return {0.0, 0.0, -mass * kGravity}; }

  /// Six limbs with yaw-pitch-pitch joints: limbs 0-2 on the right (-y) side
  /// front to hind, limbs 3-5 on the left (+y) side front to hind.
  static RobotModel default_hexapod();
};

struct BodyPose {
  Vec3 position = Vec3::Zero();  ///< CoM position, world frame (m)
  Vec3 rpy = Vec3::Zero();       ///< roll, pitch, yaw (rad)

  Mat3 rotation() const { return rotation_rpy(rpy); }
};

/// Contact frame on a wall: inward unit normal n and tangents zeta, xi with
/// n x zeta = xi.
struct ContactFrame {
  Vec3 n = Vec3::UnitZ();
  Vec3 zeta = Vec3::UnitX();
  Vec3 xi = Vec3::UnitY();

  /// Builds the frame with zeta the projection of `up` onto the plane.
  static ContactFrame from_normal(const Vec3& normal, const Vec3& up);
  void validate() const;
  /// Columns (zeta, xi, n): a proper rotation from contact to world coordinates.
  Mat3 matrix() const;
};

/// Tip pose of a chain in its mount (base) frame.
struct ChainPose {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

ChainPose chain_fk(const LimbChain& limb, const Eigen::VectorXd& theta);

/// Foot position in the body frame, p^b.
Vec3 foot_in_body(const LimbChain& limb, const Eigen::VectorXd& theta);

struct FootState {
  Vec3 position = Vec3::Zero();          ///< world frame
  Mat3 tip_rotation = Mat3::Identity();  ///< terminal link frame in world
};

/// p = R(Theta) p^b + P_CoM together with the terminal link orientation.
FootState forward_kinematics(const RobotModel& robot, const BodyPose& pose, const Eigen::VectorXd& theta,
                             int limb);

/// dp/dtheta in the limb's base (mount) frame, 3 x H.
Mat3X jacobian(const LimbChain& limb, const Eigen::VectorXd& theta);
Mat3X jacobian(const RobotModel& robot, const Eigen::VectorXd& theta, int limb);

int jacobian_rank(const Mat3X& j, double rtol = 1e-10);

/// Cartesian stiffness K = (J k^-1 J^T)^-1. Throws SingularJacobian when J is
/// rank deficient or its condition number exceeds 1e8.
Mat3 stiffness(const Mat3X& j, const Eigen::VectorXd& joint_stiffness);
Mat3 stiffness(const RobotModel& robot, const Eigen::VectorXd& theta, int limb);

/// tau = J^T f.
Eigen::VectorXd joint_torque(const Mat3X& j, const Vec3& f);
/// Torques for a force `f_base` expressed in the limb's base frame.
Eigen::VectorXd joint_torque(const RobotModel& robot, const Eigen::VectorXd& theta, int limb, const Vec3& f_base);

/// Damped least-squares IK for a target in the limb base frame. Returns the
/// joint vector reached; check the residual with chain_fk.
Eigen::VectorXd inverse_kinematics(const LimbChain& limb, const Vec3& target_base, Eigen::VectorXd seed,
                                   int max_iter = 200);

/// Gripper state angles (alpha, beta, gamma) used for gripping-force queries.
/// They are the roll/pitch/yaw of the tip rotation relative to a reference tip
/// rotation, expressed in the contact frame axes (x = zeta, y = xi, z = n).
/// The reference is the tip rotation at the default stance, where all three
/// angles are zero.
Vec3 gripper_angles(const Mat3& tip_rotation, const Mat3& reference_tip_rotation, const ContactFrame& frame);

}  // namespace riskplan::robot
