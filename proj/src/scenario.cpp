#include "pidyn/scenario.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "pidyn/qp_solver.hpp"

namespace pidyn {

namespace {

// Hand and contact frames for a contact at `offset` in the object frame.
// The tool z axis points into the object; contact z points out of it, into
// the hand. Both x axes follow the object's vertical axis.
void grasp_frames(const Vector3d& offset, Matrix3d& hand, Matrix3d& contact) {
  const Vector3d out = offset.normalized();
  Vector3d up = Vector3d::UnitZ();
  if (std::abs(out.dot(up)) > 0.9) up = Vector3d::UnitX();
  const Vector3d x = (up - out * out.dot(up)).normalized();
  hand.col(0) = x;
  hand.col(2) = -out;
  hand.col(1) = hand.col(2).cross(x);
  contact.col(0) = x;
  contact.col(2) = out;
  contact.col(1) = out.cross(x);
}

Vector6d scatter(const VectorXd& task_vector, const TaskRows& rows) {
  Vector6d out = Vector6d::Zero();
  for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]] = task_vector[i];
  return out;
}

double max_abs(const MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

TrajectorySample3 trajectory_single_arm_wipe(double r, double s, double t) {
  const double c = std::cos(s * t), sn = std::sin(s * t);
  TrajectorySample3 out;
  out.x = {r * c, r * sn, 0.0};
  out.xdot = {-r * s * sn, r * s * c, 0.0};
  out.xddot = {-r * s * s * c, -r * s * s * sn, 0.0};
  return out;
}

TrajectorySample3 trajectory_dual_arm_circle(double r, double s, double t) {
  const double c = std::cos(s * t), sn = std::sin(s * t);
  TrajectorySample3 out;
  out.x = {0.0, r * c, r * sn};
  out.xdot = {0.0, -r * s * sn, r * s * c};
  out.xddot = {0.0, -r * s * s * c, -r * s * s * sn};
  return out;
}

TrajectorySample desired_trajectory(const TrajectoryConfig& traj, double t) {
  TrajectorySample out;
  out.pose.position = traj.center;
  out.pose.orientation = traj.orientation;
  if (traj.type == TrajectoryType::Hold) return out;
  if (traj.plane == "xy") {
    const TrajectorySample3 w = trajectory_single_arm_wipe(traj.radius, traj.speed, t);
    out.pose.position += Vector3d(w.x[0], w.x[1], 0.0);
    out.pose.orientation =
        (Quaterniond(Eigen::AngleAxisd(w.x[2], Vector3d::UnitZ())) * traj.orientation)
            .normalized();
    out.twist[kAngular + 2] = w.xdot[2];
    out.accel[kAngular + 2] = w.xddot[2];
    out.twist.segment<2>(kLinear) = w.xdot.head<2>();
    out.accel.segment<2>(kLinear) = w.xddot.head<2>();
  } else {
    const TrajectorySample3 c = trajectory_dual_arm_circle(traj.radius, traj.speed, t);
    out.pose.position += c.x;
    out.twist.segment<3>(kLinear) = c.xdot;
    out.accel.segment<3>(kLinear) = c.xddot;
  }
  return out;
}

VectorXd solve_tool_pose(const ManipulatorModel& model, const Pose& target,
                         const VectorXd& seed) {
  VectorXd q = seed;
  double err_norm = 0.0;
  for (int iter = 0; iter < 2000; ++iter) {
    const Kinematics kin = forward_kinematics(model, q);
    const Vector6d e = pose_error(kin.ee, target);
    err_norm = e.norm();
    if (err_norm < 1e-13) return q;
    const MatrixXd j = point_jacobian(kin, kin.dof() - 1, kin.ee.position);
    const double damping = err_norm > 1e-4 ? 1e-3 : 1e-12;
    const MatrixXd jjt = j * j.transpose() + damping * MatrixXd::Identity(6, 6);
    VectorXd dq = -j.transpose() * jjt.ldlt().solve(e);
    const double step = dq.norm();
    if (step > 0.2) dq *= 0.2 / step;
    q += dq;
  }
  if (err_norm > 1e-10) {
    throw Error(fmt::format("{}: start pose not reachable (residual {:.3e})", model.name, err_norm));
  }
  return q;
}

Scenario build_scenario(const ScenarioConfig& config) {
  config.validate();
  Scenario sc;
  sc.config = config;
  SystemLayout& layout = sc.layout;
  for (const auto& arm : config.arms) layout.arms.push_back(arm.model);
  layout.type = config.constraint;

  const TrajectorySample start = desired_trajectory(config.trajectory, 0.0);
  VectorXd q(layout.dof());
  const auto offsets = layout.arm_offsets();
  if (layout.type == ConstraintType::SurfaceContact) {
    layout.surface_rotation = rpy_to_rotation(config.surface->rpy);
    layout.surface_height = config.surface->height;
    Pose target = start.pose;
    const Vector3d n = layout.surface_rotation.col(2);
    target.position += n * (layout.surface_height - n.dot(target.position));
    q = solve_tool_pose(layout.arms.front(), target, config.arms.front().q_seed);
  } else {
    layout.object.dims = config.object->dims;
    layout.object.mass = config.object->mass;
    // The box starts at rest in the hands: displaced from the target by the
    // impedance sag under its weight.
    Vector6d weight = Vector6d::Zero();
    weight.segment<3>(kLinear) = layout.object.mass * layout.arms.front().gravity;
    const VectorXd sag = select_rows(VectorXd(weight), config.task_rows)
                             .cwiseQuotient(config.gains.stiffness);
    const Vector6d offset = scatter(sag, config.task_rows);
    Pose held = start.pose;
    held.position += offset.segment<3>(kLinear);
    for (std::size_t i = 0; i < layout.arms.size(); ++i) {
      Matrix3d hand, contact;
      grasp_frames(config.object->grasp_offsets[i], hand, contact);
      layout.hand_in_object.push_back(Pose{config.object->grasp_offsets[i], Quaterniond(hand)});
      layout.contact_rotations.push_back(contact);
      const Pose target = compose(held, layout.hand_in_object.back());
      q.segment(offsets[i], layout.arms[i].dof()) =
          solve_tool_pose(layout.arms[i], target, config.arms[i].q_seed);
    }
  }

  // Start on the trajectory: zero constraint velocity, desired task velocity.
  const TaskRows& rows = config.task_rows;
  const int n = layout.dof();
  JointState at_rest{q, VectorXd::Zero(n), 0.0};
  const SystemSnapshot snap = make_snapshot(layout, layout.arms, at_rest);
  const MatrixXd jx = select_rows(snap.dyn.Jx, rows);
  const MatrixXd& jc = snap.constraint.jacobian.Jc;
  MatrixXd stacked(jc.rows() + jx.rows(), n);
  stacked << jc, jx;
  VectorXd target_rate = VectorXd::Zero(stacked.rows());
  target_rate.tail(jx.rows()) = select_rows(VectorXd(start.twist), rows);
  sc.initial.q = q;
  sc.initial.qdot = pseudoinverse(stacked).pinv * target_rate;
  sc.initial.time = 0.0;
  sc.posture_target = q;

  sc.gains.Kd = config.gains.stiffness.asDiagonal();
  if (config.gains.damping.size() > 0) {
    sc.gains.Dd = config.gains.damping.asDiagonal();
  } else {
    const SystemSnapshot s0 = make_snapshot(layout, layout.arms, sc.initial);
    const ProjectionState proj =
        compute_projection(s0.constraint.jacobian, s0.dyn.M, s0.dyn.h, sc.initial.qdot,
                           select_rows(s0.dyn.Jx, rows), select_rows(s0.dyn.Jx_dot, rows));
    sc.gains.Dd = critical_damping(config.gains.stiffness, proj.Lambda_c, config.gains.damping_ratio);
  }
  sc.gains.validate();
  return sc;
}

bool RunResult::passed() const {
  for (const auto& c : checks) {
    if (c.applicable && !c.passed) return false;
  }
  return true;
}

RunFailure::RunFailure(int tick, double time, const std::string& what)
    : Error(fmt::format("tick {} (t = {:.6f} s): {}", tick, time, what)), tick_(tick), time_(time) {}

RunResult run_scenario(const Scenario& sc, const RunOptions& options) {
  const auto wall_start = std::chrono::steady_clock::now();
  const ScenarioConfig& cfg = sc.config;
  IntegratorConfig integrator = cfg.integrator;
  if (options.dt) integrator.dt = *options.dt;
  const double duration = options.duration.value_or(cfg.duration);
  const unsigned seed = options.seed.value_or(cfg.seed);
  const double dt = integrator.dt;
  const TaskRows& rows = cfg.task_rows;
  const FrictionParams& friction = *cfg.friction;
  const bool grasp = sc.layout.type == ConstraintType::GraspMap;
  const std::vector<ManipulatorModel>& controller_models = sc.layout.arms;

  SimEngine sim(sc.layout, integrator, 0.0);
  DisturbanceInjector injector(cfg.disturbances, seed);
  ActiveSetQPSolver solver;
  JointState state = sc.initial;
  const int n = sc.layout.dof();
  const MatrixXd posture_k = cfg.gains.posture_stiffness * MatrixXd::Identity(n, n);
  const MatrixXd posture_d = cfg.gains.posture_damping * MatrixXd::Identity(n, n);

  RunResult result;
  const int ticks = static_cast<int>(std::llround(duration / dt));
  result.trace.reserve(ticks);
  VectorXd mu_prev;
  VectorXd task_accel_prev = VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));

  for (int tick = 0; tick < ticks; ++tick) {
    state.time = tick * dt;
    const double t = state.time;
    TraceRow row;
    try {
      // Controller.
      const SystemSnapshot snap = make_snapshot(sc.layout, controller_models, state);
      const DynamicsTerms& dyn = snap.dyn;
      const ConstraintSet& constraint = snap.constraint;
      const MatrixXd jx = select_rows(dyn.Jx, rows);
      const MatrixXd jx_dot = select_rows(dyn.Jx_dot, rows);
      const ProjectionState proj =
          compute_projection(constraint.jacobian, dyn.M, dyn.h, state.qdot, jx, jx_dot);
      const TrajectorySample des = desired_trajectory(cfg.trajectory, t);
      const TaskState task =
          make_task_state(dyn.ee_pose, des.pose, snap.task_twist, des.twist, des.accel, rows);
      const VectorXd force = control_force(task, sc.gains, proj.Lambda_c, proj.h_c);
      const VectorXd tau0 =
          dyn.h - posture_k * (state.q - sc.posture_target) - posture_d * state.qdot;
      const VectorXd tau_motion = motion_torque(force, jx, proj.P) +
                                  posture_torque(tau0, jx, proj.Lambda_c, proj.Mc_inv, proj.P);
      const ExternalWrenchEstimate fx_hat =
          estimate_external_wrench(task, sc.gains, proj.Lambda_c, cfg.estimator, task_accel_prev);

      const MatrixXd& basis = constraint.wrench_basis;
      VectorXd f_e = basis * aggregate_external_wrench(proj, dyn.M, dyn.h, state.qdot, tau_motion,
                                                       jx, fx_hat.Fx);
      if (grasp) {
        // Each hand carries an equal share of the estimated object wrench.
        const Vector6d w = scatter(fx_hat.Fx, rows);
        const double share = 1.0 / constraint.contact_count();
        for (int i = 0; i < constraint.contact_count(); ++i) {
          const Vector3d f = share * w.segment<3>(kLinear);
          const Vector3d m = share * w.segment<3>(kAngular);
          f_e.segment<3>(6 * i) += f;
          f_e.segment<3>(6 * i + 3) += m - constraint.contacts[i].r.cross(f);
        }
      }

      const QuadraticProgram qp =
          build_commanded_wrench_qp(constraint, f_e, friction, cfg.cone_edges,
                                    cfg.qp_eps_scale, cfg.cone_margin);
      VectorXd mu;
      try {
        const QPResult sol = solver.solve(qp);
        mu = sol.x;
        row.qp_iterations = sol.iterations;
        row.qp_active = static_cast<int>(sol.active_set.size());
        row.qp_objective = sol.objective;
        const KKTResiduals kkt = kkt_residuals(qp, sol);
        const double scale = 1.0 + max_abs(qp.H) * max_abs(sol.x) + max_abs(qp.b);
        row.qp_kkt = std::max({kkt.stationarity, kkt.primal, kkt.dual, kkt.complementarity}) / scale;
      } catch (const Error& e) {
        // Hold the previous commanded wrench and flag the tick.
        row.qp_failed = true;
        result.qp_failure_log.push_back(fmt::format("tick {}: {}", tick, e.what()));
        mu = mu_prev.size() == qp.variables() ? mu_prev : VectorXd::Zero(qp.variables());
        solver.reset();
      }
      mu_prev = mu;
      const VectorXd tau_constraint = constraint_torque(mu, constraint.jacobian.Jc);
      const VectorXd tau = tau_motion + tau_constraint;

      // Simulator.
      const DisturbanceSample dist = injector.sample(t, dyn.ee_pose, snap.task_twist);
      sim.set_extra_mass(dist.added_mass);
      const SimEngine::Evaluation ev = sim.evaluate(state, tau, dist.wrench);
      const ConstraintJacobian& cj = ev.snapshot.constraint.jacobian;
      row.accel_residual = (cj.Jc * ev.qddot + cj.Jc_dot * state.qdot).norm();
      task_accel_prev = jx * ev.qddot + jx_dot * state.qdot;

      row.t = t;
      row.q = state.q;
      row.qdot = state.qdot;
      row.tau_motion = tau_motion;
      row.tau_constraint = tau_constraint;
      row.F = force;
      row.Fx_hat = fx_hat.Fx;
      row.Fx_true = dist.wrench;
      row.F_e = f_e;
      row.F_c = basis * mu;
      row.lambda_true = ev.contact_wrenches;
      row.task_error = task.err_pos;
      row.x = dyn.ee_pose;
      row.x_d = des.pose;
      row.Lambda_c = proj.Lambda_c;
      row.added_mass = dist.added_mass;

      const auto local = contact_local_wrenches(row.lambda_true, constraint.contacts);
      row.min_normal_force = std::numeric_limits<double>::infinity();
      row.cone_margin = std::numeric_limits<double>::infinity();
      for (const auto& w : local) {
        row.min_normal_force = std::min(row.min_normal_force, w[2]);
        row.cone_margin = std::min(row.cone_margin, cone_margin(w, friction));
        row.cone_ok = row.cone_ok && satisfies_exact_cone(w, friction, 1e-6 * std::max(1.0, w.norm()));
      }

      const MatrixXd& p = proj.P;
      row.projector_residual =
          std::max({max_abs(p * p - p), max_abs(p - p.transpose()),
                    max_abs(constraint.jacobian.Jc * p) / std::max(1.0, max_abs(constraint.jacobian.Jc))});
      row.constraint_torque_leak =
          (p * tau_constraint).norm() / std::max(1.0, tau_constraint.norm());

      state = sim.step(state, tau, dist.wrench, &row.drift);
    } catch (const RunFailure&) {
      throw;
    } catch (const Error& e) {
      throw RunFailure(tick, t, e.what());
    }
    result.trace.push_back(std::move(row));
  }

  result.metrics = compute_metrics(result.trace, sc);
  result.metrics.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  result.checks = evaluate_checks(result.metrics, sc);
  return result;
}

RunMetrics compute_metrics(const std::vector<TraceRow>& trace, const Scenario& sc) {
  RunMetrics m;
  m.ticks = static_cast<int>(trace.size());
  const std::size_t dims = sc.config.task_rows.size();
  m.tracking_rms.assign(dims, 0.0);
  if (trace.empty()) return m;

  std::vector<int> linear;
  for (std::size_t i = 0; i < dims; ++i) {
    if (sc.config.task_rows[i] >= kLinear) linear.push_back(static_cast<int>(i));
  }
  double pos_sq = 0.0, diff_sq = 0.0, signal_sq = 0.0;
  m.min_normal_force = std::numeric_limits<double>::infinity();
  m.max_normal_force = -std::numeric_limits<double>::infinity();
  m.min_cone_margin = std::numeric_limits<double>::infinity();
  for (const auto& r : trace) {
    for (std::size_t i = 0; i < dims; ++i) m.tracking_rms[i] += r.task_error[i] * r.task_error[i];
    for (int i : linear) pos_sq += r.task_error[i] * r.task_error[i];
    diff_sq += (r.lambda_true - (r.F_e - r.F_c)).squaredNorm();
    signal_sq += r.lambda_true.squaredNorm();
    m.max_drift = std::max(m.max_drift, r.drift);
    m.min_normal_force = std::min(m.min_normal_force, r.min_normal_force);
    m.max_normal_force = std::max(m.max_normal_force, r.min_normal_force);
    m.min_cone_margin = std::min(m.min_cone_margin, r.cone_margin);
    m.qp_failures += r.qp_failed ? 1 : 0;
    m.cone_violations += r.cone_ok ? 0 : 1;
    m.max_qp_iterations = std::max(m.max_qp_iterations, r.qp_iterations);
    m.max_qp_kkt = std::max(m.max_qp_kkt, r.qp_kkt);
    m.max_accel_residual = std::max(m.max_accel_residual, r.accel_residual);
    m.max_projector_residual = std::max(m.max_projector_residual, r.projector_residual);
    m.max_constraint_torque_leak = std::max(m.max_constraint_torque_leak, r.constraint_torque_leak);
  }
  const double count = static_cast<double>(trace.size());
  for (double& v : m.tracking_rms) v = std::sqrt(v / count);
  m.position_error_rms = std::sqrt(pos_sq / count);
  m.force_discrepancy = signal_sq > 0.0 ? std::sqrt(diff_sq / signal_sq) : 0.0;
  return m;
}

std::vector<InvariantCheck> evaluate_checks(const RunMetrics& m, const Scenario& sc) {
  std::vector<InvariantCheck> checks;
  auto below = [&](const std::string& name, double value, double threshold) {
    checks.push_back({name, true, value < threshold, value, threshold});
  };
  below("constraint_drift", m.max_drift, 1e-6);
  below("qp_failures", m.qp_failures, 0.5);
  below("qp_kkt_residual", m.max_qp_kkt, 1e-8);
  below("acceleration_constraint_residual", m.max_accel_residual, 1e-6);
  below("projector_properties", m.max_projector_residual, 1e-9);
  below("constraint_torque_in_constraint_space", m.max_constraint_torque_leak, 1e-9);

  below("ground_truth_cone_violations", m.cone_violations, 0.5);

  InvariantCheck agreement{"expected_vs_true_force", sc.config.check_model_agreement, true,
                           m.force_discrepancy, sc.config.agreement_tolerance};
  agreement.passed = m.force_discrepancy < sc.config.agreement_tolerance;
  checks.push_back(agreement);

  bool finite = std::isfinite(m.max_drift) && std::isfinite(m.min_normal_force) &&
                std::isfinite(m.max_normal_force) && std::isfinite(m.min_cone_margin) &&
                std::isfinite(m.force_discrepancy) && std::isfinite(m.position_error_rms);
  for (double v : m.tracking_rms) finite = finite && std::isfinite(v);
  checks.push_back({"finite_metrics", true, finite, finite ? 1.0 : 0.0, 1.0});
  return checks;
}

}  // namespace pidyn
