#include "riskplan/planner.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "riskplan/errors.hpp"

namespace riskplan::planner {

namespace {

using Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kAngleStep = 1e-6;

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Eigen::Map<const VectorXd> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

void Weights::validate() const {
  if (!(destination >= 0.0 && body_position >= 0.0 && foot >= 0.0 && body_rotation >= 0.0 && force >= 0.0)) {
    throw InvalidInput("weights must be >= 0");
  }
}

void StrideBounds::validate() const {
  if (!(body_position > 0.0 && body_rotation > 0.0 && foot > 0.0)) throw InvalidInput("stride bounds must be > 0");
}

void PlanProblem::validate() const {
  robot.validate();
  terrain.validate();
  const int l = robot.limb_count();
  gait.validate(l);
  weights.validate();
  bounds.validate();
  if (!gp) throw InvalidInput("plan problem: missing GP model");
  if (static_cast<int>(limb_wall.size()) != l) throw InvalidInput("plan problem: limb_wall needs one entry per limb");
  for (int w : limb_wall) {
    if (w < 0 || w >= static_cast<int>(terrain.walls.size())) throw InvalidInput("plan problem: bad wall index");
  }
  if (!(delta >= 0.0 && delta < 1.0)) throw InvalidInput("plan problem: delta must lie in [0, 1)");
  if (forced_m && *forced_m < 1) throw InvalidInput("plan problem: forced M must be >= 1");
  if (static_cast<int>(start.feet.size()) != l || static_cast<int>(start.joints.size()) != l ||
      static_cast<int>(destination_feet.size()) != l || static_cast<int>(reference_tip.size()) != l) {
    throw InvalidInput("plan problem: stance data needs one entry per limb");
  }
  for (int i = 0; i < l; ++i) {
    if (start.joints[static_cast<std::size_t>(i)].size() != robot.limbs[static_cast<std::size_t>(i)].dof()) {
      throw InvalidInput("plan problem: start joint vector size mismatch for limb " + std::to_string(i));
    }
  }
  if (!(force_limit > 0.0 && tilt_limit > 0.0 && tilt_limit < std::numbers::pi / 2.0)) {
    throw InvalidInput("plan problem: force and tilt limits must be positive, tilt below 90 deg");
  }
}

int PlanProblem::stochastic_per_round() const {
  return forced_m ? *forced_m : risk::count_stochastic(gait.contacts_per_instant());
}

Stance default_stance(const robot::RobotModel& robot, const terrain::TerrainMap& terrain,
                      const std::vector<int>& limb_wall, const robot::BodyPose& pose) {
  Stance s;
  s.pose = pose;
  const Mat3 rb = pose.rotation();
  for (int i = 0; i < robot.limb_count(); ++i) {
    const auto& limb = robot.limbs[static_cast<std::size_t>(i)];
    const auto& wall = terrain.walls.at(static_cast<std::size_t>(limb_wall.at(static_cast<std::size_t>(i))));
    const Vec3 mount = rb * limb.mount_position + pose.position;
    const Vec3 foot = mount - wall.normal_offset(mount) * wall.frame.n;
    const Vec3 target = limb.mount_rotation.transpose() * (rb.transpose() * (foot - pose.position) - limb.mount_position);
    VectorXd seed = VectorXd::Zero(limb.dof());
    if (limb.dof() >= 3) {
      seed[1] = -0.6;
      seed[2] = 1.2;
    }
    VectorXd theta = robot::inverse_kinematics(limb, target, seed, 500);
    if ((robot::chain_fk(limb, theta).position - target).norm() > 1e-9) {
      throw InvalidInput("default stance: limb " + limb.name + " cannot reach its wall");
    }
    s.feet.push_back(foot);
    s.joints.push_back(theta);
  }
  return s;
}

GripStats grip_stats(const gp::GPModel& model, const gp::GripState& s) {
  const auto p = model.predict(s);
  return {p.mean, p.variance + model.noise_variance()};
}

double Trajectory::min_cone_margin() const {
  double m = kInf;
  for (const auto& inst : instants) {
    for (const auto& c : inst.limbs) {
      if (!c.contact) continue;
      for (double v : c.cone_margin) m = std::min(m, v);
    }
  }
  return m;
}

Layout Layout::count(const PlanProblem& problem) {
  Layout out;
  const int n = problem.gait.rounds;
  const int t = problem.gait.instants_per_round();
  const int l = problem.robot.limb_count();
  int contact_vars = 0;
  for (int k = 0; k < t; ++k) {
    for (int i = 0; i < l; ++i) {
      if (problem.gait.contact(k, i)) {
        ++out.n_contacts;
        contact_vars += problem.robot.limbs[static_cast<std::size_t>(i)].dof() + 3;
      }
    }
  }
  out.n_contacts *= n;
  contact_vars *= n;
  out.n_footholds = n * l;
  for (int i = 0; i < l; ++i) {
    out.n_region_edges +=
        n * static_cast<int>(problem.terrain.walls[static_cast<std::size_t>(problem.limb_wall[static_cast<std::size_t>(i)])]
                                 .region.size());
  }
  out.n_vars = 3 * out.n_footholds + 6 * n * t + contact_vars;
  out.n_eq = 3 * out.n_contacts + 6 * n * t + out.n_footholds;
  out.n_ineq = 6 * out.n_contacts + 12 * n * t + out.n_region_edges + 6 * out.n_footholds;
  return out;
}

struct Assembly::Impl {
  PlanProblem p;
  int rounds = 0;
  int per_round = 0;
  int limbs = 0;
  int instants = 0;
  risk::RiskBudget budget;
  double z = 0.0;
  Layout layout;
  std::vector<std::vector<int>> foot_off;     // [round 1..N][limb], index 0 unused
  std::vector<int> pose_off;                  // [instant]
  std::vector<std::vector<int>> contact_off;  // [instant][limb], -1 for swing

  int foot_round(int t, int i) const {
    const int r = t / per_round;
    const LimbPhase ph = p.gait.phases[static_cast<std::size_t>(t % per_round)][static_cast<std::size_t>(i)];
    return ph == LimbPhase::New ? r + 1 : r;
  }
  Vec3 foothold(const VectorXd& x, int j, int i) const {
    if (j == 0) return p.start.feet[static_cast<std::size_t>(i)];
    return x.segment<3>(foot_off[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
  }
  const robot::LimbChain& limb(int i) const { return p.robot.limbs[static_cast<std::size_t>(i)]; }
  const terrain::Wall& wall(int i) const {
    return p.terrain.walls[static_cast<std::size_t>(p.limb_wall[static_cast<std::size_t>(i)])];
  }

  explicit Impl(const PlanProblem& problem) : p(problem) {
    p.validate();
    rounds = p.gait.rounds;
    per_round = p.gait.instants_per_round();
    limbs = p.robot.limb_count();
    instants = rounds * per_round;
    budget = risk::allocate(p.delta, rounds, std::max(1, p.stochastic_per_round()));
    z = risk::inv_norm_cdf(1.0 - budget.delta_jk);
    int off = 0;
    foot_off.assign(static_cast<std::size_t>(rounds + 1), std::vector<int>(static_cast<std::size_t>(limbs), -1));
    for (int j = 1; j <= rounds; ++j) {
      for (int i = 0; i < limbs; ++i) {
        foot_off[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = off;
        off += 3;
      }
    }
    pose_off.resize(static_cast<std::size_t>(instants));
    contact_off.assign(static_cast<std::size_t>(instants), std::vector<int>(static_cast<std::size_t>(limbs), -1));
    for (int t = 0; t < instants; ++t) {
      pose_off[static_cast<std::size_t>(t)] = off;
      off += 6;
      for (int i = 0; i < limbs; ++i) {
        if (!p.gait.contact(t % per_round, i)) continue;
        contact_off[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = off;
        off += limb(i).dof() + 3;
      }
    }
    layout = Layout::count(p);
    if (off != layout.n_vars) throw InvalidInput("internal layout mismatch");
  }

  robot::BodyPose pose_at(const VectorXd& x, int t) const {
    const int o = pose_off[static_cast<std::size_t>(t)];
    return {x.segment<3>(o), x.segment<3>(o + 3)};
  }

  robot::BodyPose previous_pose(const VectorXd& x, int t) const {
    return t >= per_round ? pose_at(x, t - per_round) : p.start.pose;
  }

  Vec3 angles(const Vec3& rpy, const VectorXd& theta, int i) const {
    const auto& lb = limb(i);
    const Mat3 tip = robot::rotation_rpy(rpy) * lb.mount_rotation * robot::chain_fk(lb, theta).rotation;
    return robot::gripper_angles(tip, p.reference_tip[static_cast<std::size_t>(i)], wall(i).frame);
  }

  VectorXd lower() const {
    VectorXd lo = VectorXd::Constant(layout.n_vars, -kInf);
    for (int t = 0; t < instants; ++t) {
      const int o = pose_off[static_cast<std::size_t>(t)];
      lo[o + 3] = -p.tilt_limit;
      lo[o + 4] = -p.tilt_limit;
      lo[o + 5] = -std::numbers::pi;
      for (int i = 0; i < limbs; ++i) {
        const int c = contact_off[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
        if (c < 0) continue;
        const auto& lb = limb(i);
        for (int q = 0; q < lb.dof(); ++q) {
          lo[c + q] = lb.joint_lower.empty() ? -std::numbers::pi : lb.joint_lower[static_cast<std::size_t>(q)];
        }
        lo.segment<3>(c + lb.dof()).setConstant(-p.force_limit);
      }
    }
    return lo;
  }

  VectorXd upper() const {
    VectorXd hi = VectorXd::Constant(layout.n_vars, kInf);
    for (int t = 0; t < instants; ++t) {
      const int o = pose_off[static_cast<std::size_t>(t)];
      hi[o + 3] = p.tilt_limit;
      hi[o + 4] = p.tilt_limit;
      hi[o + 5] = std::numbers::pi;
      for (int i = 0; i < limbs; ++i) {
        const int c = contact_off[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
        if (c < 0) continue;
        const auto& lb = limb(i);
        for (int q = 0; q < lb.dof(); ++q) {
          hi[c + q] = lb.joint_upper.empty() ? std::numbers::pi : lb.joint_upper[static_cast<std::size_t>(q)];
        }
        hi.segment<3>(c + lb.dof()).setConstant(p.force_limit);
      }
    }
    return hi;
  }

  VectorXd initial(double blend) const {
    VectorXd x = VectorXd::Zero(layout.n_vars);
    for (int j = 1; j <= rounds; ++j) {
      const double a = blend * j / static_cast<double>(rounds);
      for (int i = 0; i < limbs; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        Vec3 f = p.start.feet[ui] + a * (p.destination_feet[ui] - p.start.feet[ui]);
        f -= wall(i).normal_offset(f) * wall(i).frame.n;
        x.segment<3>(foot_off[static_cast<std::size_t>(j)][ui]) = f;
      }
    }
    const Vec3 weight = -p.robot.gravity_force();
    for (int t = 0; t < instants; ++t) {
      const double a = (t + 1) / static_cast<double>(instants);
      robot::BodyPose pose;
      pose.position = p.start.pose.position + a * (p.destination_pose.position - p.start.pose.position);
      pose.rpy = p.start.pose.rpy + a * (p.destination_pose.rpy - p.start.pose.rpy);
      const int o = pose_off[static_cast<std::size_t>(t)];
      x.segment<3>(o) = pose.position;
      x.segment<3>(o + 3) = pose.rpy;
      const Mat3 rb = pose.rotation();
      const int contacts = p.gait.contacts(t % per_round);
      for (int i = 0; i < limbs; ++i) {
        const int c = contact_off[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
        if (c < 0) continue;
        const auto& lb = limb(i);
        const Vec3 foot = foothold(x, foot_round(t, i), i);
        const Vec3 target = lb.mount_rotation.transpose() * (rb.transpose() * (foot - pose.position) - lb.mount_position);
        VectorXd theta = robot::inverse_kinematics(lb, target, p.start.joints[static_cast<std::size_t>(i)], 300);
        x.segment(c, lb.dof()) = theta;
        x.segment<3>(c + lb.dof()) = weight / contacts;
      }
    }
    return x.cwiseMax(lower()).cwiseMin(upper());
  }

  /// Per-variable scales: 0.1 m for positions, 1 rad for angles, 10 N for forces.
  VectorXd x_scale() const {
    VectorXd s = VectorXd::Constant(layout.n_vars, 0.1);
    for (int t = 0; t < instants; ++t) {
      const int o = pose_off[static_cast<std::size_t>(t)];
      s.segment<3>(o + 3).setConstant(0.1);
      for (int i = 0; i < limbs; ++i) {
        const int c = contact_off[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
        if (c < 0) continue;
        s.segment(c, limb(i).dof()).setConstant(0.1);
        s.segment<3>(c + limb(i).dof()).setConstant(10.0);
      }
    }
    return s;
  }

  void evaluate(const VectorXd& x, bool derivs, nlp::Evaluation& ev) const;
  void scales(VectorXd& eq, VectorXd& ineq) const;
  Trajectory decode(const VectorXd& x) const;
};

void Assembly::Impl::scales(VectorXd& eq, VectorXd& ineq) const {
  eq.resize(layout.n_eq);
  ineq.resize(layout.n_ineq);
  int re = 0, ri = 0;
  for (int t = 0; t < instants; ++t) {
    for (int i = 0; i < limbs; ++i) {
      if (contact_off[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] < 0) continue;
      eq.segment<3>(re).setConstant(0.01);
      re += 3;
      ineq.segment<5>(ri).setConstant(10.0);
      ineq[ri + 5] = 1.0;
      ri += 6;
    }
    eq.segment<3>(re).setConstant(10.0);
    eq.segment<3>(re + 3).setConstant(1.0);
    re += 6;
    ineq.segment<6>(ri).setConstant(0.01);
    ineq.segment<6>(ri + 6).setConstant(0.01);
    ri += 12;
  }
  for (int j = 1; j <= rounds; ++j) {
    for (int i = 0; i < limbs; ++i) {
      eq[re++] = 0.01;
      const int edges = static_cast<int>(wall(i).region.size());
      ineq.segment(ri, edges).setConstant(0.01);
      ri += edges;
      ineq.segment<6>(ri).setConstant(0.01);
      ri += 6;
    }
  }
}

void Assembly::Impl::evaluate(const VectorXd& x, bool derivs, nlp::Evaluation& ev) const {
  ev.eq.resize(layout.n_eq);
  ev.ineq.resize(layout.n_ineq);
  ev.gradient = VectorXd::Zero(layout.n_vars);
  Triplets te, ti;
  if (derivs) {
    te.reserve(static_cast<std::size_t>(layout.n_contacts) * 40 + static_cast<std::size_t>(instants) * 80);
    ti.reserve(static_cast<std::size_t>(layout.n_contacts) * 120 + static_cast<std::size_t>(instants) * 24);
  }
  auto add_e = [&](int r, int c, double v) {
    if (derivs && v != 0.0) te.emplace_back(r, c, v);
  };
  auto add_i = [&](int r, int c, double v) {
    if (derivs && v != 0.0) ti.emplace_back(r, c, v);
  };
  const auto& w = p.weights;
  double obj = 0.0;
  int re = 0, ri = 0;
  const Vec3 f_tot = p.robot.gravity_force();
  const auto& model = *p.gp;
  const double noise_var = model.noise_variance();

  for (int t = 0; t < instants; ++t) {
    const int po = pose_off[static_cast<std::size_t>(t)];
    const robot::BodyPose pose = pose_at(x, t);
    const Mat3 rb = pose.rotation();
    const auto drb = robot::rotation_rpy_derivatives(pose.rpy);
    Vec3 force_sum = f_tot;
    Vec3 moment = Vec3::Zero();
    struct MomentTerm {
      int foot_col;
      int force_col;
      Vec3 arm;
      Vec3 f;
    };
    std::vector<MomentTerm> terms;

    for (int i = 0; i < limbs; ++i) {
      const int c = contact_off[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
      if (c < 0) continue;
      const auto& lb = limb(i);
      const int h = lb.dof();
      const int fc = c + h;
      const int j = foot_round(t, i);
      const int foot_col = j > 0 ? foot_off[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] : -1;
      const Vec3 foot = foothold(x, j, i);
      const VectorXd theta = x.segment(c, h);
      const Vec3 f = x.segment<3>(fc);
      const robot::ChainPose chain = robot::chain_fk(lb, theta);
      const robot::Mat3X jc = robot::jacobian(lb, theta);
      const Vec3 pb = lb.mount_position + lb.mount_rotation * chain.position;

      // Forward kinematics consistency.
      ev.eq.segment<3>(re) = foot - (rb * pb + pose.position);
      if (derivs) {
        const robot::Mat3X dfk = -(rb * lb.mount_rotation * jc);
        for (int a = 0; a < 3; ++a) {
          if (foot_col >= 0) add_e(re + a, foot_col + a, 1.0);
          add_e(re + a, po + a, -1.0);
          for (int k = 0; k < 3; ++k) add_e(re + a, po + 3 + k, -(drb[static_cast<std::size_t>(k)] * pb)[a]);
          for (int q = 0; q < h; ++q) add_e(re + a, c + q, dfk(a, q));
        }
      }
      re += 3;

      force_sum += f;
      moment += (foot - pose.position).cross(f);
      terms.push_back({foot_col, fc, foot - pose.position, f});

      // Gripping-force statistics at the planned gripper state.
      const auto& wl = wall(i);
      const Vec3& n = wl.frame.n;
      Eigen::Vector2d dlam_uv;
      const double lam = wl.friction(wl.to_plane(foot), dlam_uv);
      const Vec3 dlam = dlam_uv.x() * wl.frame.xi + dlam_uv.y() * wl.frame.zeta;
      const Vec3 ang = angles(pose.rpy, theta, i);
      const auto pg = model.predict_with_gradient(gp::GripState{ang[0], ang[1], ang[2], lam});
      const double var = pg.variance + noise_var;
      const double sd = std::sqrt(var);
      const double g_eff = pg.mean - z * sd;
      const Eigen::Vector4d dg = pg.d_mean - z * pg.d_variance / (2.0 * sd);

      Eigen::Matrix<double, 3, Eigen::Dynamic> dang(3, 3 + h);
      if (derivs) {
        for (int k = 0; k < 3; ++k) {
          Vec3 rp = pose.rpy, rm = pose.rpy;
          rp[k] += kAngleStep;
          rm[k] -= kAngleStep;
          dang.col(k) = (angles(rp, theta, i) - angles(rm, theta, i)) / (2.0 * kAngleStep);
        }
        for (int q = 0; q < h; ++q) {
          VectorXd tp = theta, tm = theta;
          tp[q] += kAngleStep;
          tm[q] -= kAngleStep;
          dang.col(3 + q) = (angles(pose.rpy, tp, i) - angles(pose.rpy, tm, i)) / (2.0 * kAngleStep);
        }
      }

      // Cone rows.
      ev.ineq[ri] = -n.dot(f);
      if (derivs) {
        for (int a = 0; a < 3; ++a) add_i(ri, fc + a, -n[a]);
      }
      const Vec3 tangents[4] = {wl.frame.zeta, -wl.frame.zeta, wl.frame.xi, -wl.frame.xi};
      const double nf = n.dot(f);
      for (int k = 0; k < 4; ++k) {
        const int row = ri + 1 + k;
        const Vec3 a = tangents[k] - lam * n;
        ev.ineq[row] = a.dot(f) - g_eff;
        if (!derivs) continue;
        for (int e = 0; e < 3; ++e) add_i(row, fc + e, a[e]);
        if (foot_col >= 0) {
          const Vec3 dfoot = -(nf + dg[3]) * dlam;
          for (int e = 0; e < 3; ++e) add_i(row, foot_col + e, dfoot[e]);
        }
        const Eigen::RowVectorXd dstate = -(dg.head<3>().transpose() * dang);
        for (int e = 0; e < 3; ++e) add_i(row, po + 3 + e, dstate[e]);
        for (int q = 0; q < h; ++q) add_i(row, c + q, dstate[3 + q]);
      }

      // Torque limit as (|tau|^2 - tau_max^2) / (2 tau_max).
      const Mat3 am = rb * lb.mount_rotation;
      const Vec3 fl = am.transpose() * f;
      const VectorXd tau = jc.transpose() * fl;
      const double tmax = lb.torque_limit;
      const int rt = ri + 5;
      ev.ineq[rt] = (tau.squaredNorm() - tmax * tmax) / (2.0 * tmax);
      if (derivs) {
        const Vec3 dfv = am * (jc * tau) / tmax;
        for (int e = 0; e < 3; ++e) add_i(rt, fc + e, dfv[e]);
        for (int k = 0; k < 3; ++k) {
          const Vec3 dfl = (drb[static_cast<std::size_t>(k)] * lb.mount_rotation).transpose() * f;
          add_i(rt, po + 3 + k, tau.dot(jc.transpose() * dfl) / tmax);
        }
        for (int q = 0; q < h; ++q) {
          VectorXd tp = theta, tm = theta;
          tp[q] += kAngleStep;
          tm[q] -= kAngleStep;
          const robot::Mat3X djc = (robot::jacobian(lb, tp) - robot::jacobian(lb, tm)) / (2.0 * kAngleStep);
          add_i(rt, c + q, tau.dot(djc.transpose() * fl) / tmax);
        }
      }
      ri += 6;

      obj += w.force * f.squaredNorm();
      ev.gradient.segment<3>(fc) += 2.0 * w.force * f;
    }

    // Force and moment equilibrium about the centre of mass.
    ev.eq.segment<3>(re) = force_sum;
    ev.eq.segment<3>(re + 3) = moment;
    if (derivs) {
      Mat3 dp = Mat3::Zero();
      for (const auto& m : terms) {
        for (int a = 0; a < 3; ++a) add_e(re + a, m.force_col + a, 1.0);
        const Mat3 dfm = skew(m.arm);
        const Mat3 dfoot = -skew(m.f);
        dp -= dfoot;
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) {
            add_e(re + 3 + a, m.force_col + b, dfm(a, b));
            if (m.foot_col >= 0) add_e(re + 3 + a, m.foot_col + b, dfoot(a, b));
          }
        }
      }
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) add_e(re + 3 + a, po + b, dp(a, b));
      }
    }
    re += 6;

    // Body stride bounds against the same phase of the previous round.
    const robot::BodyPose prev = previous_pose(x, t);
    const int prev_off = t >= per_round ? pose_off[static_cast<std::size_t>(t - per_round)] : -1;
    const Vec3 dpos = pose.position - prev.position;
    const Vec3 drot = pose.rpy - prev.rpy;
    for (int a = 0; a < 3; ++a) {
      ev.ineq[ri + a] = dpos[a] - p.bounds.body_position;
      ev.ineq[ri + 3 + a] = -dpos[a] - p.bounds.body_position;
      ev.ineq[ri + 6 + a] = drot[a] - p.bounds.body_rotation;
      ev.ineq[ri + 9 + a] = -drot[a] - p.bounds.body_rotation;
      add_i(ri + a, po + a, 1.0);
      add_i(ri + 3 + a, po + a, -1.0);
      add_i(ri + 6 + a, po + 3 + a, 1.0);
      add_i(ri + 9 + a, po + 3 + a, -1.0);
      if (prev_off >= 0) {
        add_i(ri + a, prev_off + a, -1.0);
        add_i(ri + 3 + a, prev_off + a, 1.0);
        add_i(ri + 6 + a, prev_off + 3 + a, -1.0);
        add_i(ri + 9 + a, prev_off + 3 + a, 1.0);
      }
    }
    ri += 12;

    // Intermediate body costs between consecutive instants.
    const robot::BodyPose before = t > 0 ? pose_at(x, t - 1) : p.start.pose;
    const Vec3 step_p = pose.position - before.position;
    const Vec3 step_r = pose.rpy - before.rpy;
    obj += w.body_position * step_p.squaredNorm() + w.body_rotation * step_r.squaredNorm();
    ev.gradient.segment<3>(po) += 2.0 * w.body_position * step_p;
    ev.gradient.segment<3>(po + 3) += 2.0 * w.body_rotation * step_r;
    if (t > 0) {
      const int bo = pose_off[static_cast<std::size_t>(t - 1)];
      ev.gradient.segment<3>(bo) -= 2.0 * w.body_position * step_p;
      ev.gradient.segment<3>(bo + 3) -= 2.0 * w.body_rotation * step_r;
    }
  }

  // Footholds: wall plane, contact region, stride and foot costs.
  for (int j = 1; j <= rounds; ++j) {
    for (int i = 0; i < limbs; ++i) {
      const auto& wl = wall(i);
      const int fo = foot_off[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      const Vec3 foot = foothold(x, j, i);
      ev.eq[re] = wl.normal_offset(foot);
      for (int a = 0; a < 3; ++a) add_e(re, fo + a, wl.frame.n[a]);
      ++re;
      const Eigen::Vector2d uv = wl.to_plane(foot);
      for (const auto& hp : wl.half_planes()) {
        ev.ineq[ri] = hp.c.dot(uv) - hp.d;
        const Vec3 g = hp.c.x() * wl.frame.xi + hp.c.y() * wl.frame.zeta;
        for (int a = 0; a < 3; ++a) add_i(ri, fo + a, g[a]);
        ++ri;
      }
      const int po = j > 1 ? foot_off[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i)] : -1;
      const Vec3 step = foot - foothold(x, j - 1, i);
      for (int a = 0; a < 3; ++a) {
        ev.ineq[ri + a] = step[a] - p.bounds.foot;
        ev.ineq[ri + 3 + a] = -step[a] - p.bounds.foot;
        add_i(ri + a, fo + a, 1.0);
        add_i(ri + 3 + a, fo + a, -1.0);
        if (po >= 0) {
          add_i(ri + a, po + a, -1.0);
          add_i(ri + 3 + a, po + a, 1.0);
        }
      }
      ri += 6;
      obj += w.foot * step.squaredNorm();
      ev.gradient.segment<3>(fo) += 2.0 * w.foot * step;
      if (po >= 0) ev.gradient.segment<3>(po) -= 2.0 * w.foot * step;
    }
  }

  // Terminal cost towards the destination configuration.
  {
    const int po = pose_off[static_cast<std::size_t>(instants - 1)];
    const robot::BodyPose last = pose_at(x, instants - 1);
    const Vec3 dp = last.position - p.destination_pose.position;
    const Vec3 dr = last.rpy - p.destination_pose.rpy;
    obj += w.destination * (dp.squaredNorm() + dr.squaredNorm());
    ev.gradient.segment<3>(po) += 2.0 * w.destination * dp;
    ev.gradient.segment<3>(po + 3) += 2.0 * w.destination * dr;
    for (int i = 0; i < limbs; ++i) {
      const int fo = foot_off[static_cast<std::size_t>(rounds)][static_cast<std::size_t>(i)];
      const Vec3 d = foothold(x, rounds, i) - p.destination_feet[static_cast<std::size_t>(i)];
      obj += w.destination * d.squaredNorm();
      ev.gradient.segment<3>(fo) += 2.0 * w.destination * d;
    }
  }
  ev.objective = obj;
  if (derivs) {
    ev.eq_jac.resize(layout.n_eq, layout.n_vars);
    ev.eq_jac.setFromTriplets(te.begin(), te.end());
    ev.ineq_jac.resize(layout.n_ineq, layout.n_vars);
    ev.ineq_jac.setFromTriplets(ti.begin(), ti.end());
  }
}

Trajectory Assembly::Impl::decode(const VectorXd& x) const {
  Trajectory tr;
  tr.budget = budget;
  tr.quantile = z;
  tr.footholds.resize(static_cast<std::size_t>(rounds + 1));
  for (int j = 0; j <= rounds; ++j) {
    for (int i = 0; i < limbs; ++i) tr.footholds[static_cast<std::size_t>(j)].push_back(foothold(x, j, i));
  }
  for (int t = 0; t < instants; ++t) {
    InstantState inst;
    inst.round = t / per_round;
    inst.phase = t % per_round;
    inst.pose = pose_at(x, t);
    const Mat3 rb = inst.pose.rotation();
    for (int i = 0; i < limbs; ++i) {
      ContactState cs;
      cs.wall = p.limb_wall[static_cast<std::size_t>(i)];
      cs.frame = wall(i).frame;
      const int c = contact_off[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
      if (c >= 0) {
        const auto& lb = limb(i);
        const auto& wl = wall(i);
        cs.contact = true;
        cs.foot = foothold(x, foot_round(t, i), i);
        cs.theta = x.segment(c, lb.dof());
        cs.force = x.segment<3>(c + lb.dof());
        cs.grip_angles = angles(inst.pose.rpy, cs.theta, i);
        cs.lambda = wl.friction_at(cs.foot);
        const GripStats gs =
            grip_stats(*p.gp, {cs.grip_angles[0], cs.grip_angles[1], cs.grip_angles[2], cs.lambda});
        cs.grip_mean = gs.mean;
        cs.grip_variance = gs.variance;
        const auto rows = risk::friction_cone(wl.frame, cs.lambda);
        cs.cone_margin[0] = -rows[0].residual(cs.force, 0.0);
        for (int k = 1; k < risk::kConeRows; ++k) {
          const auto det = risk::reformulate(rows[static_cast<std::size_t>(k)], gs.mean, gs.variance, budget.delta_jk);
          cs.cone_margin[static_cast<std::size_t>(k)] = -det.residual(cs.force);
        }
        const Vec3 fl = (rb * lb.mount_rotation).transpose() * cs.force;
        cs.torque = robot::joint_torque(robot::jacobian(lb, cs.theta), fl);
        cs.torque_margin = lb.torque_limit - cs.torque.norm();
      } else {
        cs.foot = foothold(x, foot_round(t, i), i);
        cs.theta = VectorXd();
        cs.torque = VectorXd::Zero(limb(i).dof());
        cs.torque_margin = limb(i).torque_limit;
      }
      inst.limbs.push_back(std::move(cs));
    }
    tr.instants.push_back(std::move(inst));
  }
  return tr;
}

Assembly::Assembly(const PlanProblem& problem) {
  auto impl = std::make_shared<Impl>(problem);
  impl_ = impl;
  layout_ = impl->layout;
  nlp_.n_vars = layout_.n_vars;
  nlp_.n_eq = layout_.n_eq;
  nlp_.n_ineq = layout_.n_ineq;
  nlp_.lower = impl->lower();
  nlp_.upper = impl->upper();
  nlp_.x0 = impl->initial(1.0);
  std::shared_ptr<const Impl> cimpl = impl;
  nlp_.evaluate = [cimpl](const VectorXd& x, bool derivs, nlp::Evaluation& ev) { cimpl->evaluate(x, derivs, ev); };
  options_ = impl->p.solver;
  if (options_.x_scale.size() == 0) options_.x_scale = impl->x_scale();
  if (options_.eq_scale.size() == 0 || options_.ineq_scale.size() == 0) impl->scales(options_.eq_scale, options_.ineq_scale);
}

Trajectory Assembly::decode(const VectorXd& x) const { return impl_->decode(x); }

VectorXd Assembly::initial_point(double foot_blend) const { return impl_->initial(foot_blend); }

PlanResult plan(const PlanProblem& problem, const PlanOptions& options) {
  PlanResult out;
  std::unique_ptr<Assembly> assembly;
  try {
    assembly = std::make_unique<Assembly>(problem);
  } catch (const ZeroRisk& e) {
    out.status = nlp::Status::Infeasible;
    out.zero_risk = true;
    out.reason = std::string("ZeroRisk: ") + e.what();
    out.layout = Layout::count(problem);
    return out;
  }
  out.layout = assembly->layout();
  bool have = false;
  for (double blend : options.foot_blends) {
    nlp::NlpProblem nlp = assembly->nlp();
    nlp.x0 = assembly->initial_point(blend);
    nlp::SolveReport rep = nlp::solve(nlp, assembly->solver_options());
    ++out.starts_tried;
    const bool better =
        !have || (rep.status == nlp::Status::Converged &&
                  (out.report.status != nlp::Status::Converged || rep.objective < out.report.objective));
    if (better) {
      out.report = std::move(rep);
      have = true;
    }
  }
  out.status = out.report.status;
  out.reason = out.report.message;
  out.trajectory = assembly->decode(out.report.x);
  return out;
}

EnergyProxy energy_proxy(const Trajectory& traj) {
  EnergyProxy e;
  for (const auto& inst : traj.instants) {
    for (const auto& c : inst.limbs) {
      if (!c.contact) continue;
      e.force += c.force.squaredNorm();
      e.torque += c.torque.squaredNorm();
    }
  }
  return e;
}

Mat3 world_stiffness(const robot::RobotModel& robot, const robot::BodyPose& pose, const VectorXd& theta, int limb) {
  const auto& lb = robot.limbs.at(static_cast<std::size_t>(limb));
  const Mat3 a = pose.rotation() * lb.mount_rotation;
  const Mat3 k = robot::stiffness(robot::jacobian(lb, theta), as_vector(lb.joint_stiffness));
  return a * k * a.transpose();
}

}  // namespace riskplan::planner
