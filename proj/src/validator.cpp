#include "riskplan/validator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include "riskplan/errors.hpp"
#include "riskplan/random_stream.hpp"
#include "riskplan/risk.hpp"

namespace riskplan::validator {

namespace {

using Eigen::Matrix4d;
using Eigen::VectorXd;
using robot::Mat3;
using robot::Vec3;

Mat3 rodrigues(const Vec3& axis, double angle) {
  const Vec3 k = axis.normalized();
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(angle) * kx + (1.0 - std::cos(angle)) * kx * kx;
}

Matrix4d transform(const Mat3& r, const Vec3& p) {
  Matrix4d t = Matrix4d::Identity();
  t.topLeftCorner<3, 3>() = r;
  t.topRightCorner<3, 1>() = p;
  return t;
}

Mat3 rpy_matrix(const Vec3& rpy) {
  return rodrigues(Vec3::UnitZ(), rpy[2]) * rodrigues(Vec3::UnitY(), rpy[1]) * rodrigues(Vec3::UnitX(), rpy[0]);
}

/// World transform of a limb tip by composing homogeneous transforms.
Matrix4d tip_transform(const robot::LimbChain& limb, const robot::BodyPose& pose, const VectorXd& theta) {
  Matrix4d t = transform(rpy_matrix(pose.rpy), pose.position) * transform(limb.mount_rotation, limb.mount_position);
  for (int i = 0; i < limb.dof(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    t = t * transform(rodrigues(limb.joint_axes[ui], theta[i]), Vec3::Zero()) *
        transform(Mat3::Identity(), Vec3(limb.link_lengths[ui], 0.0, 0.0));
  }
  return t;
}

/// Mount-frame tip position, for finite-difference Jacobians.
Vec3 tip_in_mount(const robot::LimbChain& limb, const VectorXd& theta) {
  Matrix4d t = Matrix4d::Identity();
  for (int i = 0; i < limb.dof(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    t = t * transform(rodrigues(limb.joint_axes[ui], theta[i]), Vec3::Zero()) *
        transform(Mat3::Identity(), Vec3(limb.link_lengths[ui], 0.0, 0.0));
  }
  return t.topRightCorner<3, 1>();
}

Eigen::MatrixXd fd_jacobian(const robot::LimbChain& limb, const VectorXd& theta) {
  constexpr double h = 1e-7;
  Eigen::MatrixXd j(3, limb.dof());
  for (int i = 0; i < limb.dof(); ++i) {
    VectorXd tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    j.col(i) = (tip_in_mount(limb, tp) - tip_in_mount(limb, tm)) / (2.0 * h);
  }
  return j;
}

Vec3 roll_pitch_yaw(const Mat3& r) {
  return {std::atan2(r(2, 1), r(2, 2)), std::asin(std::clamp(-r(2, 0), -1.0, 1.0)), std::atan2(r(1, 0), r(0, 0))};
}

}  // namespace

double AuditReport::max_violation() const {
  return std::max({force_residual, moment_residual, fk_residual, -min_cone_margin, -min_torque_margin,
                   region_violation, plane_residual, stride_violation, swing_force, 0.0});
}

nlohmann::json AuditReport::to_json() const {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& x : findings) {
    f.push_back({{"family", x.family}, {"instant", x.instant}, {"limb", x.limb}, {"value", x.value}});
  }
  return {{"force_residual", force_residual},
          {"moment_residual", moment_residual},
          {"fk_residual", fk_residual},
          {"min_cone_margin", min_cone_margin},
          {"min_torque_margin", min_torque_margin},
          {"region_violation", region_violation},
          {"plane_residual", plane_residual},
          {"stride_violation", stride_violation},
          {"swing_force", swing_force},
          {"max_violation", max_violation()},
          {"findings", f}};
}

AuditReport audit(const planner::Trajectory& traj, const planner::PlanProblem& problem, double tol) {
  AuditReport rep;
  rep.min_cone_margin = std::numeric_limits<double>::infinity();
  rep.min_torque_margin = std::numeric_limits<double>::infinity();
  auto flag = [&](const std::string& family, int instant, int limb, double value) {
    if (value > tol) rep.findings.push_back({family, instant, limb, value});
  };
  const double delta_jk = traj.budget.delta_jk;
  const double z = delta_jk > 0.0 ? risk::inv_norm_cdf(1.0 - delta_jk) : 0.0;
  const int per_round = problem.gait.instants_per_round();
  const Vec3 weight = problem.robot.gravity_force();

  for (std::size_t t = 0; t < traj.instants.size(); ++t) {
    const auto& inst = traj.instants[t];
    const int ti = static_cast<int>(t);
    Vec3 fsum = weight;
    Vec3 msum = Vec3::Zero();
    for (std::size_t i = 0; i < inst.limbs.size(); ++i) {
      const auto& cs = inst.limbs[i];
      const int li = static_cast<int>(i);
      const bool scheduled = problem.gait.contact(ti % per_round, li);
      if (!cs.contact || !scheduled) {
        const double fn = cs.force.cwiseAbs().maxCoeff();
        rep.swing_force = std::max(rep.swing_force, fn);
        flag("swing_force", ti, li, fn);
        if (scheduled != cs.contact) flag("schedule", ti, li, 1.0);
        continue;
      }
      const auto& limb = problem.robot.limbs[i];
      const auto& wall = problem.terrain.walls[static_cast<std::size_t>(problem.limb_wall[i])];
      const Matrix4d tip = tip_transform(limb, inst.pose, cs.theta);
      const Vec3 p = tip.topRightCorner<3, 1>();
      const double fk = (p - cs.foot).cwiseAbs().maxCoeff();
      rep.fk_residual = std::max(rep.fk_residual, fk);
      flag("fk", ti, li, fk);

      fsum += cs.force;
      msum += (cs.foot - inst.pose.position).cross(cs.force);

      // Gripper state from the tip frame relative to the reference, in contact axes.
      Mat3 c;
      c << wall.frame.zeta, wall.frame.xi, wall.frame.n;
      const Mat3 rel = c.transpose() * tip.topLeftCorner<3, 3>() * problem.reference_tip[i].transpose() * c;
      const Vec3 ang = roll_pitch_yaw(rel);
      const double lam = wall.friction_at(cs.foot);
      const auto pred = problem.gp->predict({ang[0], ang[1], ang[2], lam});
      const double sd = std::sqrt(pred.variance + problem.gp->noise_variance());
      const double usable = pred.mean - z * sd;
      const double nf = wall.frame.n.dot(cs.force);
      double margin = nf;
      for (const Vec3& dir : {wall.frame.zeta, wall.frame.xi}) {
        const double shear = std::abs(dir.dot(cs.force));
        margin = std::min(margin, lam * nf + usable - shear);
      }
      rep.min_cone_margin = std::min(rep.min_cone_margin, margin);
      flag("cone", ti, li, -margin);

      const Mat3 to_mount = (rpy_matrix(inst.pose.rpy) * limb.mount_rotation).transpose();
      const VectorXd tau = fd_jacobian(limb, cs.theta).transpose() * (to_mount * cs.force);
      const double tm = limb.torque_limit - tau.norm();
      rep.min_torque_margin = std::min(rep.min_torque_margin, tm);
      flag("torque", ti, li, -tm);

      for (int q = 0; q < limb.dof(); ++q) {
        const auto uq = static_cast<std::size_t>(q);
        if (!limb.joint_lower.empty()) {
          const double v = std::max(limb.joint_lower[uq] - cs.theta[q], cs.theta[q] - limb.joint_upper[uq]);
          flag("joint_limit", ti, li, v);
        }
      }
    }
    const double fr = fsum.cwiseAbs().maxCoeff();
    const double mr = msum.cwiseAbs().maxCoeff();
    rep.force_residual = std::max(rep.force_residual, fr);
    rep.moment_residual = std::max(rep.moment_residual, mr);
    flag("force_equilibrium", ti, -1, fr);
    flag("moment_equilibrium", ti, -1, mr);

    const robot::BodyPose& prev =
        ti >= per_round ? traj.instants[t - static_cast<std::size_t>(per_round)].pose : problem.start.pose;
    const double sp = ((inst.pose.position - prev.position).cwiseAbs().array() - problem.bounds.body_position).maxCoeff();
    const double sr = ((inst.pose.rpy - prev.rpy).cwiseAbs().array() - problem.bounds.body_rotation).maxCoeff();
    rep.stride_violation = std::max({rep.stride_violation, sp, sr});
    flag("body_stride", ti, -1, std::max(sp, sr));
  }

  for (std::size_t j = 1; j < traj.footholds.size(); ++j) {
    for (std::size_t i = 0; i < traj.footholds[j].size(); ++i) {
      const auto& wall = problem.terrain.walls[static_cast<std::size_t>(problem.limb_wall[i])];
      const Vec3& f = traj.footholds[j][i];
      const double plane = std::abs(wall.frame.n.dot(f - wall.origin));
      rep.plane_residual = std::max(rep.plane_residual, plane);
      flag("wall_plane", -1, static_cast<int>(i), plane);
      const Eigen::Vector2d uv(wall.frame.xi.dot(f - wall.origin), wall.frame.zeta.dot(f - wall.origin));
      double region = -std::numeric_limits<double>::infinity();
      const std::size_t m = wall.region.size();
      for (std::size_t k = 0; k < m; ++k) {
        const Eigen::Vector2d a = wall.region[k];
        const Eigen::Vector2d b = wall.region[(k + 1) % m];
        const Eigen::Vector2d e = b - a;
        const double cross = e.x() * (uv.y() - a.y()) - e.y() * (uv.x() - a.x());
        region = std::max(region, -cross / e.norm());
      }
      rep.region_violation = std::max(rep.region_violation, region);
      flag("region", -1, static_cast<int>(i), region);
      const double step = ((f - traj.footholds[j - 1][i]).cwiseAbs().array() - problem.bounds.foot).maxCoeff();
      rep.stride_violation = std::max(rep.stride_violation, step);
      flag("foot_stride", -1, static_cast<int>(i), step);
    }
  }
  if (!std::isfinite(rep.min_cone_margin)) rep.min_cone_margin = 0.0;
  if (!std::isfinite(rep.min_torque_margin)) rep.min_torque_margin = 0.0;
  return rep;
}

double wald_half_width(double rate, std::int64_t samples) {
  if (samples <= 0) return 0.0;
  constexpr double z99 = 2.5758293035489004;
  return z99 * std::sqrt(rate * (1.0 - rate) / static_cast<double>(samples));
}

RiskReport certify(const planner::Trajectory& traj, const gp::GPModel& model, std::int64_t samples,
                   std::uint64_t seed, int threads) {
  if (samples < 1) throw InvalidInput("certify: sample count must be >= 1");
  struct Contact {
    int instant, round, limb;
    double mean, sd;
    std::array<double, 4> load;  // shear row value without the gripping force
  };
  std::vector<Contact> contacts;
  for (std::size_t t = 0; t < traj.instants.size(); ++t) {
    const auto& inst = traj.instants[t];
    for (std::size_t i = 0; i < inst.limbs.size(); ++i) {
      const auto& cs = inst.limbs[i];
      if (!cs.contact) continue;
      const auto stats = planner::grip_stats(model, {cs.grip_angles[0], cs.grip_angles[1], cs.grip_angles[2], cs.lambda});
      const auto rows = risk::friction_cone(cs.frame, cs.lambda);
      Contact c{static_cast<int>(t), inst.round, static_cast<int>(i), stats.mean, std::sqrt(stats.variance), {}};
      for (int k = 0; k < 4; ++k) c.load[static_cast<std::size_t>(k)] = rows[static_cast<std::size_t>(k + 1)].alpha.dot(cs.force);
      contacts.push_back(c);
    }
  }
  const std::size_t nc = contacts.size();
  const std::size_t nrows = 4 * nc;
  const CounterStream stream(seed);

  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::int64_t>(workers, samples));
  std::vector<std::vector<std::int64_t>> counts(workers, std::vector<std::int64_t>(nrows, 0));
  std::vector<std::int64_t> joint(workers, 0);
  auto work = [&](unsigned w) {
    const std::int64_t begin = samples * w / workers;
    const std::int64_t end = samples * (w + 1) / workers;
    auto& local = counts[w];
    for (std::int64_t s = begin; s < end; ++s) {
      bool any = false;
      const std::uint64_t base = static_cast<std::uint64_t>(s) * nc;
      for (std::size_t c = 0; c < nc; ++c) {
        const double grip = contacts[c].mean + contacts[c].sd * stream.normal(base + c);
        for (std::size_t k = 0; k < 4; ++k) {
          if (contacts[c].load[k] - grip > 0.0) {
            ++local[4 * c + k];
            any = true;
          }
        }
      }
      if (any) ++joint[w];
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& th : pool) th.join();

  RiskReport rep;
  rep.samples = samples;
  rep.seed = seed;
  rep.delta = traj.budget.delta;
  rep.delta_jk = traj.budget.delta_jk;
  const char* names[4] = {"+zeta", "-zeta", "+xi", "-xi"};
  for (std::size_t r = 0; r < nrows; ++r) {
    std::int64_t total = 0;
    for (unsigned w = 0; w < workers; ++w) total += counts[w][r];
    const Contact& c = contacts[r / 4];
    ConstraintRate cr;
    cr.instant = c.instant;
    cr.round = c.round;
    cr.limb = c.limb;
    cr.row = static_cast<int>(r % 4) + 1;
    cr.id = "t" + std::to_string(c.instant) + "/l" + std::to_string(c.limb) + "/" + names[r % 4];
    cr.violations = total;
    cr.rate = static_cast<double>(total) / static_cast<double>(samples);
    cr.half_width = wald_half_width(cr.rate, samples);
    cr.delta_jk = rep.delta_jk;
    rep.sum_of_rates += cr.rate;
    rep.constraints.push_back(cr);
  }
  for (unsigned w = 0; w < workers; ++w) rep.joint_violations += joint[w];
  rep.joint_rate = static_cast<double>(rep.joint_violations) / static_cast<double>(samples);
  rep.joint_half_width = wald_half_width(rep.joint_rate, samples);
  return rep;
}

nlohmann::json RiskReport::to_json() const {
  double max_rate = 0.0;
  for (const auto& c : constraints) max_rate = std::max(max_rate, c.rate);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : constraints) {
    if (c.violations == 0) continue;
    rows.push_back({{"id", c.id}, {"round", c.round}, {"instant", c.instant}, {"limb", c.limb}, {"rate", c.rate},
                    {"half_width_99", c.half_width}});
  }
  return {{"samples", samples},
          {"seed", seed},
          {"delta", delta},
          {"delta_jk", delta_jk},
          {"constraints", constraints.size()},
          {"joint_violations", joint_violations},
          {"joint_rate", joint_rate},
          {"joint_half_width_99", joint_half_width},
          {"sum_of_rates", sum_of_rates},
          {"max_constraint_rate", max_rate},
          {"nonzero_constraints", rows}};
}

void RiskReport::write_csv(std::ostream& out) const {
  out << "constraint_id,round,limb,rate,delta_jk\n";
  out.precision(10);
  for (const auto& c : constraints) {
    out << c.id << ',' << c.round << ',' << c.limb << ',' << c.rate << ',' << c.delta_jk << '\n';
  }
}

}  // namespace riskplan::validator
