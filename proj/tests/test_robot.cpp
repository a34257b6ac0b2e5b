#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>
#include <random>

#include "riskplan/errors.hpp"
#include "riskplan/robot_model.hpp"
#include "test_util.hpp"

using namespace riskplan;
using namespace riskplan::robot;
using testutil::uniform;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Homogeneous-transform stack: mount, then per joint a rotation followed by a
// translation along the local x axis.
Vec3 transform_stack(const LimbChain& limb, const Eigen::VectorXd& theta) {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  for (int i = 0; i < limb.dof(); ++i) {
    Eigen::Matrix4d r = Eigen::Matrix4d::Identity();
    r.topLeftCorner<3, 3>() = Eigen::AngleAxisd(theta[i], limb.joint_axes[i].normalized()).toRotationMatrix();
    Eigen::Matrix4d l = Eigen::Matrix4d::Identity();
    l(0, 3) = limb.link_lengths[i];
    t = t * r * l;
  }
  Eigen::Matrix4d mount = Eigen::Matrix4d::Identity();
  mount.topLeftCorner<3, 3>() = limb.mount_rotation;
  mount.topRightCorner<3, 1>() = limb.mount_position;
  return (mount * t).topRightCorner<3, 1>();
}

Eigen::VectorXd random_theta(std::mt19937_64& rng, const LimbChain& limb) {
  Eigen::VectorXd th(limb.dof());
  for (int i = 0; i < limb.dof(); ++i) th[i] = uniform(rng, limb.joint_lower[i], limb.joint_upper[i]);
  return th;
}

LimbChain one_link(double length) {
  LimbChain l;
  l.joint_axes = {Vec3::UnitZ()};
  l.link_lengths = {length};
  l.joint_stiffness = {100.0};
  return l;
}

}  // namespace

TEST_CASE("default hexapod is valid") {
  const auto robot = RobotModel::default_hexapod();
  CHECK_NOTHROW(robot.validate());
  CHECK(robot.limb_count() == 6);
  CHECK(robot.mass == 11.5);
  for (const auto& l : robot.limbs) CHECK(l.torque_limit == 27.0);
  CHECK(robot.gravity_force().isApprox(Vec3(0, 0, -11.5 * kGravity)));
}

TEST_CASE("identity orientation gives the body-frame foot position") {
  const auto robot = RobotModel::default_hexapod();
  const Eigen::Vector3d th(0.1, 0.3, 1.2);
  const auto fs = forward_kinematics(robot, BodyPose{}, th, 2);
  CHECK(fs.position.isApprox(foot_in_body(robot.limbs[2], th), 1e-15));
}

TEST_CASE("yaw of 90 degrees maps x onto y") {
  const Vec3 p = rotation_rpy({0.0, 0.0, std::numbers::pi / 2}) * Vec3(1, 0, 0);
  CHECK((p - Vec3(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("FK matches a homogeneous-transform stack") {
  const auto robot = RobotModel::default_hexapod();
  const Eigen::Vector3d th(10 * kDeg, 20 * kDeg, -30 * kDeg);
  for (int i = 0; i < robot.limb_count(); ++i) {
    CHECK((foot_in_body(robot.limbs[i], th) - transform_stack(robot.limbs[i], th)).norm() <= 1e-10);
  }
  std::mt19937_64 rng(21);
  for (int t = 0; t < 100; ++t) {
    const int i = static_cast<int>(rng() % 6);
    const auto q = random_theta(rng, robot.limbs[i]);
    CHECK((foot_in_body(robot.limbs[i], q) - transform_stack(robot.limbs[i], q)).norm() <= 1e-10);
  }
}

TEST_CASE("FK shifts exactly with the body position") {
  const auto robot = RobotModel::default_hexapod();
  std::mt19937_64 rng(22);
  for (int t = 0; t < 50; ++t) {
    const auto q = random_theta(rng, robot.limbs[0]);
    BodyPose a{testutil::uniform_vec(rng, 3, -1, 1), testutil::uniform_vec(rng, 3, -0.4, 0.4)};
    BodyPose b = a;
    const Vec3 shift = testutil::uniform_vec(rng, 3, -2, 2);
    b.position += shift;
    const Vec3 pa = forward_kinematics(robot, a, q, 0).position;
    const Vec3 pb = forward_kinematics(robot, b, q, 0).position;
    CHECK((pb - pa - shift).norm() <= 1e-14);
  }
}

TEST_CASE("rpy round trip and derivatives") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 100; ++t) {
    const Vec3 rpy = testutil::uniform_vec(rng, 3, -1.2, 1.2);
    CHECK((rpy_from_rotation(rotation_rpy(rpy)) - rpy).norm() < 1e-12);
    const auto d = rotation_rpy_derivatives(rpy);
    for (int k = 0; k < 3; ++k) {
      Vec3 a = rpy, b = rpy;
      a[k] += 1e-6;
      b[k] -= 1e-6;
      const Mat3 fd = (rotation_rpy(a) - rotation_rpy(b)) / 2e-6;
      CHECK((fd - d[k]).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("single revolute link Jacobian") {
  const auto j = jacobian(one_link(0.3), Eigen::VectorXd::Zero(1));
  CHECK((j.col(0) - Vec3(0, 0.3, 0)).norm() < 1e-15);
}

TEST_CASE("Jacobian matches central differences of FK") {
  const auto robot = RobotModel::default_hexapod();
  std::mt19937_64 rng(24);
  for (int i = 0; i < robot.limb_count(); ++i) {
    const auto& limb = robot.limbs[i];
    for (int t = 0; t < 100; ++t) {
      const auto q = random_theta(rng, limb);
      const Mat3X j = jacobian(limb, q);
      for (int c = 0; c < limb.dof(); ++c) {
        Eigen::VectorXd a = q, b = q;
        a[c] += 1e-6;
        b[c] -= 1e-6;
        const Vec3 fd = (chain_fk(limb, a).position - chain_fk(limb, b).position) / 2e-6;
        CHECK((fd - j.col(c)).cwiseAbs().maxCoeff() <= 1e-5);
      }
    }
  }
}

TEST_CASE("straightened limb is singular") {
  const auto robot = RobotModel::default_hexapod();
  const Eigen::Vector3d straight(0.0, 0.0, 0.0);
  const auto j = jacobian(robot.limbs[0], straight);
  CHECK(jacobian_rank(j) < 3);
  CHECK_THROWS_AS(stiffness(j, Eigen::Vector3d(300, 300, 300)), SingularJacobian);
  CHECK(jacobian_rank(jacobian(robot.limbs[0], Eigen::Vector3d(0.1, 0.4, 1.0))) == 3);
}

TEST_CASE("identity Jacobian stiffness is the joint stiffness") {
  const Mat3X j = Mat3::Identity();
  const Mat3 k = stiffness(j, Eigen::Vector3d(100, 200, 300));
  CHECK((k - Eigen::Vector3d(100, 200, 300).asDiagonal().toDenseMatrix()).norm() < 1e-10);
}

TEST_CASE("stiffness inverts the compliance, is symmetric PD and homogeneous in k") {
  const auto robot = RobotModel::default_hexapod();
  std::mt19937_64 rng(25);
  for (int t = 0; t < 100; ++t) {
    const auto& limb = robot.limbs[static_cast<std::size_t>(rng() % 6)];
    const auto q = random_theta(rng, limb);
    const Mat3X j = jacobian(limb, q);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
    if (svd.singularValues()[2] < 1e-3 * svd.singularValues()[0]) continue;
    const Eigen::Vector3d kj = testutil::uniform_vec(rng, 3, 50, 500);
    const Mat3 k = stiffness(j, kj);
    const Mat3 c = j * kj.cwiseInverse().asDiagonal() * j.transpose();
    CHECK((k * c - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * k.norm());
    CHECK(Eigen::SelfAdjointEigenSolver<Mat3>(k).eigenvalues().minCoeff() > 0.0);
    CHECK((stiffness(j, 2.0 * kj) - 2.0 * k).norm() <= 1e-9 * k.norm());
  }
}

TEST_CASE("joint torque is J transpose f") {
  const Mat3X id = Mat3::Identity();
  CHECK((joint_torque(id, Vec3(1, 2, 3)) - Vec3(1, 2, 3)).norm() == 0.0);
  const auto robot = RobotModel::default_hexapod();
  std::mt19937_64 rng(26);
  for (int t = 0; t < 100; ++t) {
    const auto q = random_theta(rng, robot.limbs[1]);
    const Vec3 f = testutil::uniform_vec(rng, 3, -100, 100);
    const Mat3X j = jacobian(robot.limbs[1], q);
    CHECK(joint_torque(robot, q, 1, Vec3::Zero()).norm() == 0.0);
    const auto tau = joint_torque(robot, q, 1, f);
    const Eigen::VectorXd dq = testutil::uniform_vec(rng, 3, -1, 1);
    CHECK(std::abs(tau.dot(dq) - f.dot(j * dq)) <= 1e-10 * std::max(1.0, f.norm()));
    const double jn = Eigen::JacobiSVD<Eigen::MatrixXd>(j).singularValues()[0];
    CHECK(tau.norm() <= jn * f.norm() * (1 + 1e-12));
  }
}

TEST_CASE("inverse kinematics reaches a reachable target") {
  const auto robot = RobotModel::default_hexapod();
  const Eigen::Vector3d q(0.2, -0.3, 1.1);
  const Vec3 target = chain_fk(robot.limbs[4], q).position;
  const auto sol = inverse_kinematics(robot.limbs[4], target, Eigen::Vector3d(0.0, 0.0, 0.8));
  CHECK((chain_fk(robot.limbs[4], sol).position - target).norm() < 1e-9);
}

TEST_CASE("contact frame is a right-handed orthonormal triad") {
  const auto f = ContactFrame::from_normal(Vec3(0, 1, 0.1), Vec3::UnitZ());
  CHECK_NOTHROW(f.validate());
  CHECK(std::abs(f.matrix().determinant() - 1.0) < 1e-12);
  CHECK((f.n.cross(f.zeta) - f.xi).norm() < 1e-12);
  CHECK_THROWS_AS(ContactFrame::from_normal(Vec3::UnitZ(), Vec3::UnitZ()), InvalidInput);
}

TEST_CASE("gripper angles are zero at the reference and follow rotations in contact axes") {
  const auto f = ContactFrame::from_normal(Vec3(0, 1, 0), Vec3::UnitZ());
  const Mat3 ref = rotation_rpy({0.3, -0.2, 0.9});
  CHECK(gripper_angles(ref, ref, f).norm() < 1e-12);
  const double g = 0.4;
  const Mat3 about_n = Eigen::AngleAxisd(g, f.n).toRotationMatrix();
  CHECK((gripper_angles(about_n * ref, ref, f) - Vec3(0, 0, g)).norm() < 1e-12);
  const Mat3 about_zeta = Eigen::AngleAxisd(-0.25, f.zeta).toRotationMatrix();
  CHECK((gripper_angles(about_zeta * ref, ref, f) - Vec3(-0.25, 0, 0)).norm() < 1e-12);
}
