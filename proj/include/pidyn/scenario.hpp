#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pidyn/config.hpp"
#include "pidyn/sim.hpp"

namespace pidyn {

/// Three-component trajectory sample with analytic derivatives.
struct TrajectorySample3 {
  Vector3d x = Vector3d::Zero();
  Vector3d xdot = Vector3d::Zero();
  Vector3d xddot = Vector3d::Zero();
};

/// (r cos st, r sin st, 0): planar position and desired yaw.
TrajectorySample3 trajectory_single_arm_wipe(double r, double s, double t);

/// (0, r cos st, r sin st) relative to the circle centre.
TrajectorySample3 trajectory_dual_arm_circle(double r, double s, double t);

/// Full desired pose; twist and acceleration are [angular; linear].
struct TrajectorySample {
  Pose pose;
  Vector6d twist = Vector6d::Zero();
  Vector6d accel = Vector6d::Zero();
};

TrajectorySample desired_trajectory(const TrajectoryConfig& trajectory, double t);

/// Damped least-squares solve of the tool pose; throws Error if it does not
/// converge to 1e-10.
VectorXd solve_tool_pose(const ManipulatorModel& model, const Pose& target, const VectorXd& seed);

/// Everything needed to run a configured scenario.
struct Scenario {
  ScenarioConfig config;
  SystemLayout layout;
  JointState initial;
  ImpedanceGains gains;
  VectorXd posture_target;
};

Scenario build_scenario(const ScenarioConfig& config);

struct TraceRow {
  double t = 0.0;
  VectorXd q, qdot;
  VectorXd tau_motion, tau_constraint;
  VectorXd F;           // task-dim control force
  VectorXd Fx_hat;      // task-dim estimated external wrench
  Vector6d Fx_true = Vector6d::Zero();
  VectorXd F_e, F_c, lambda_true;  // stacked world contact wrenches [f; m], 6K
  VectorXd task_error;  // task-dim pose error
  Pose x, x_d;
  MatrixXd Lambda_c;
  double added_mass = 0.0;
  double drift = 0.0;
  double accel_residual = 0.0;
  double min_normal_force = 0.0;  // ground truth, over contacts
  double cone_margin = 0.0;       // ground truth, over contacts
  bool cone_ok = true;
  int qp_iterations = 0;
  int qp_active = 0;
  double qp_objective = 0.0;
  double qp_kkt = 0.0;
  bool qp_failed = false;
  double projector_residual = 0.0;   // max of |P^2 - P|, |P - P'|, |Jc P|
  double constraint_torque_leak = 0.0;  // |P tau_constraint| / max(1, |tau_constraint|)
};

struct RunMetrics {
  std::vector<double> tracking_rms;   // per task row
  double position_error_rms = 0.0;    // translational error norm (m), 0 when untracked
  double max_drift = 0.0;
  double min_normal_force = 0.0;
  double max_normal_force = 0.0;
  double min_cone_margin = 0.0;
  int cone_violations = 0;            // ticks where a true contact wrench leaves the cone
  double force_discrepancy = 0.0;     // RMS(lambda_true - (F_e - F_c)) / RMS(lambda_true)
  int qp_failures = 0;
  int max_qp_iterations = 0;
  double max_qp_kkt = 0.0;
  double max_accel_residual = 0.0;
  double max_projector_residual = 0.0;
  double max_constraint_torque_leak = 0.0;
  int ticks = 0;
  double runtime_s = 0.0;
};

struct InvariantCheck {
  std::string name;
  bool applicable = true;
  bool passed = true;
  double value = 0.0;
  double threshold = 0.0;
};

struct RunResult {
  std::vector<TraceRow> trace;
  RunMetrics metrics;
  std::vector<InvariantCheck> checks;
  std::vector<std::string> qp_failure_log;  // "tick <i>: <message>"

  bool passed() const;
};

struct RunOptions {
  std::optional<double> duration;
  std::optional<double> dt;
  std::optional<unsigned> seed;
};

/// Integration or dynamics failure inside the loop, tagged with the tick.
class RunFailure : public Error {
 public:
  RunFailure(int tick, double time, const std::string& what);
  int tick() const { return tick_; }
  double time() const { return time_; }

 private:
  int tick_;
  double time_;
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Metrics and invariant checks over a finished trace.
RunMetrics compute_metrics(const std::vector<TraceRow>& trace, const Scenario& scenario);
std::vector<InvariantCheck> evaluate_checks(const RunMetrics& metrics, const Scenario& scenario);

}  // namespace pidyn
