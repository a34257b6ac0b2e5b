#pragma once

// Risk-bounded pose and contact-force planning over rounds of a gait, and
// the deflection solve that turns planned forces into position commands.

#include <Eigen/Core>
#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "riskplan/gait.hpp"
#include "riskplan/gp_gripforce.hpp"
#include "riskplan/nlp.hpp"
#include "riskplan/risk.hpp"
#include "riskplan/robot_model.hpp"
#include "riskplan/terrain.hpp"

namespace riskplan::planner {

using robot::Mat3;
using robot::Vec3;

struct Weights {
  double destination = 10.0;    ///< W_D
  double body_position = 1.0;   ///< W_BPos
  double foot = 1.0;            ///< W_Foot
  double body_rotation = 1.0;   ///< W_BRot
  double force = 1e-4;          ///< weight on the sum of squared contact forces

  void validate() const;
};

struct StrideBounds {
  double body_position = 0.1;  ///< m, per axis
  double body_rotation = 0.2;  ///< rad, per axis
  double foot = 0.15;          ///< m, per axis

  void validate() const;
};

/// Robot configuration at the start and the destination of a plan.
struct Stance {
  robot::BodyPose pose;
  std::vector<Vec3> feet;                ///< world frame, one per limb
  std::vector<Eigen::VectorXd> joints;   ///< one per limb
};

struct PlanProblem {
  robot::RobotModel robot;
  terrain::TerrainMap terrain;
  std::vector<int> limb_wall;  ///< wall index touched by each limb
  GaitSchedule gait;
  double delta = 0.1;
  std::optional<int> forced_m;  ///< overrides the per-round stochastic count M
  std::shared_ptr<const gp::GPModel> gp;
  Weights weights;
  StrideBounds bounds;
  Stance start;
  robot::BodyPose destination_pose;
  std::vector<Vec3> destination_feet;
  /// Tip rotation of each limb at the default stance; gripper angles are
  /// measured from it.
  std::vector<Mat3> reference_tip;
  double force_limit = 500.0;  ///< N, box bound per force component
  double tilt_limit = 0.5;     ///< rad, box bound on body roll and pitch
  nlp::SolverOptions solver = default_solver();

  /// Feasibility tolerance 1e-7, below the audit tolerance.
  static nlp::SolverOptions default_solver() {
    nlp::SolverOptions o;
    o.tol_feas = 1e-7;
    return o;
  }

  void validate() const;
  int stochastic_per_round() const;
};

/// Builds the default standing configuration between the walls: feet level
/// with the body on the wall planes, reached by IK from a bent-knee seed.
Stance default_stance(const robot::RobotModel& robot, const terrain::TerrainMap& terrain,
                      const std::vector<int>& limb_wall, const robot::BodyPose& pose);

/// Gripping force statistics at a contact: mean and the variance used in
/// the chance constraints (latent plus observation noise).
struct GripStats {
  double mean = 0.0;
  double variance = 0.0;
};
GripStats grip_stats(const gp::GPModel& model, const gp::GripState& s);

struct ContactState {
  bool contact = false;
  int wall = -1;
  robot::ContactFrame frame;
  Vec3 foot = Vec3::Zero();          ///< foothold (world)
  Eigen::VectorXd theta;             ///< joint angles
  Vec3 force = Vec3::Zero();         ///< reaction force on the robot (world)
  Vec3 grip_angles = Vec3::Zero();   ///< alpha, beta, gamma
  double lambda = 0.0;               ///< friction at the foothold
  double grip_mean = 0.0;
  double grip_variance = 0.0;
  std::array<double, 5> cone_margin{};  ///< -(reformulated residual); >= 0 feasible
  Eigen::VectorXd torque;
  double torque_margin = 0.0;        ///< tau_Th - |tau|
};

struct InstantState {
  int round = 0;
  int phase = 0;
  robot::BodyPose pose;
  std::vector<ContactState> limbs;
};

struct Trajectory {
  std::vector<InstantState> instants;
  std::vector<std::vector<Vec3>> footholds;  ///< [round 0..N][limb]; round 0 is the start
  risk::RiskBudget budget;
  double quantile = 0.0;  ///< Phi^-1(1 - Delta_jk)

  double min_cone_margin() const;
};

/// Variable and constraint layout of the assembled program. With N rounds,
/// T instants per round, L limbs, C contact-instants, H joints per limb and
/// E region edges per foothold:
///   vars = 3 N L (footholds) + 6 N T (body poses) + C (H + 3) (joints, forces)
///   eq   = 3 C (kinematics) + 6 N T (equilibrium) + N L (wall planes)
///   ineq = 6 C (cone rows, torque) + 12 N T (body strides) + N L E (regions)
///          + 6 N L (foot strides)
struct Layout {
  int n_vars = 0;
  int n_eq = 0;
  int n_ineq = 0;
  int n_contacts = 0;  ///< contact-instants over the whole plan
  int n_footholds = 0;
  int n_region_edges = 0;

  /// Closed-form counts for a given problem, independent of the assembler.
  static Layout count(const PlanProblem& problem);
};

/// Assembled program together with the decoder for its solution vector.
class Assembly {
 public:
  /// Throws ZeroRisk for Delta = 0 and InvalidInput for invalid problems.
  explicit Assembly(const PlanProblem& problem);

  const nlp::NlpProblem& nlp() const { return nlp_; }
  const Layout& layout() const { return layout_; }
  const nlp::SolverOptions& solver_options() const { return options_; }
  Trajectory decode(const Eigen::VectorXd& x) const;
  /// Initial point with footholds and body placed at fraction `foot_blend`
  /// between start and destination.
  Eigen::VectorXd initial_point(double foot_blend) const;

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
  nlp::NlpProblem nlp_;
  Layout layout_;
  nlp::SolverOptions options_;
};

struct PlanResult {
  nlp::Status status = nlp::Status::Infeasible;
  std::string reason;
  bool zero_risk = false;
  Trajectory trajectory;
  nlp::SolveReport report;
  Layout layout;
  int starts_tried = 0;
};

struct PlanOptions {
  /// Foothold blends in [0, 1] used as initial points; the best converged
  /// solution is kept.
  std::vector<double> foot_blends{1.0};
};

PlanResult plan(const PlanProblem& problem, const PlanOptions& options = {});

struct EnergyProxy {
  double force = 0.0;   ///< sum over contact-instants of |f|^2 (N^2)
  double torque = 0.0;  ///< sum of |tau|^2 (N^2 m^2)
};
EnergyProxy energy_proxy(const Trajectory& traj);

/// Per-instant deflections. c_i = K_i^-1 f_i in world axes; delta_wall_i =
/// c_i + delta_com so f_i = K_i (delta_wall_i - delta_com). Positive
/// components compress the limb along the reaction force.
struct InstantDeflection {
  std::vector<int> limbs;
  std::vector<Vec3> delta_wall;
  Vec3 delta_com = Vec3::Zero();
  double residual = 0.0;  ///< max |f - K (delta_wall - delta_com)| (N)
};

struct DeflectionSolution {
  std::vector<InstantDeflection> instants;
  double max_residual = 0.0;
  double max_wall_norm = 0.0;
};

/// Minimizes sum |delta_wall|^2 under the stiffness relation per instant,
/// projecting delta_com onto the balls |delta_wall_i| <= threshold when
/// needed. Throws DeflectionBoundExceeded when the balls do not intersect.
/// With fix_com_zero the body deflection is pinned to zero.
DeflectionSolution solve_deflection(const Trajectory& traj, const robot::RobotModel& robot, double threshold = 0.02,
                                    bool fix_com_zero = false);

/// World-frame Cartesian stiffness of a limb at a body pose.
Mat3 world_stiffness(const robot::RobotModel& robot, const robot::BodyPose& pose, const Eigen::VectorXd& theta,
                     int limb);

}  // namespace riskplan::planner
