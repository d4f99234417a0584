#include "pidyn/impedance.hpp"

#include <cmath>

#include "pidyn/dynamics.hpp"

namespace pidyn {

namespace {

bool is_spd(const MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::LLT<MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

void ImpedanceGains::validate() const {
  if (!is_spd(Kd)) throw ConfigError("gains.stiffness", "must be symmetric positive definite");
  if (!is_spd(Dd)) throw ConfigError("gains.damping", "must be symmetric positive definite");
  if (Kd.rows() != Dd.rows()) throw ConfigError("gains", "stiffness and damping sizes differ");
}

TaskRows full_task_rows() { return {0, 1, 2, 3, 4, 5}; }

Vector6d pose_error(const Pose& x, const Pose& x_d) {
  Vector6d e;
  const Quaterniond rel = x_d.orientation.conjugate() * x.orientation;
  e.segment<3>(kAngular) = x_d.rotation() * rotation_vector(rel);
  e.segment<3>(kLinear) = x.position - x_d.position;
  return e;
}

MatrixXd select_rows(const MatrixXd& m, const TaskRows& rows) {
  MatrixXd out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

VectorXd select_rows(const VectorXd& v, const TaskRows& rows) {
  VectorXd out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = v[rows[i]];
  return out;
}

TaskState make_task_state(const Pose& x, const Pose& x_d, const Vector6d& xdot,
                          const Vector6d& xdot_d, const Vector6d& xddot_d,
                          const TaskRows& rows) {
  TaskState t;
  t.x = x;
  t.x_d = x_d;
  t.xdot = select_rows(VectorXd(xdot), rows);
  t.xdot_d = select_rows(VectorXd(xdot_d), rows);
  t.xddot_d = select_rows(VectorXd(xddot_d), rows);
  t.err_pos = select_rows(VectorXd(pose_error(x, x_d)), rows);
  t.err_vel = t.xdot - t.xdot_d;
  return t;
}

VectorXd control_force(const TaskState& task, const ImpedanceGains& gains,
                       const MatrixXd& Lambda_c, const VectorXd& h_c) {
  return h_c + Lambda_c * task.xddot_d - gains.Dd * task.err_vel - gains.Kd * task.err_pos;
}

VectorXd motion_torque(const VectorXd& F, const MatrixXd& Jx, const MatrixXd& P) {
  if (F.size() != Jx.rows() || P.rows() != Jx.cols()) {
    throw DimensionError("motion_torque: F, Jx and P sizes disagree");
  }
  return P * (Jx.transpose() * F);
}

ExternalWrenchEstimate estimate_external_wrench(const TaskState& task,
                                                const ImpedanceGains& gains,
                                                const MatrixXd& Lambda_c, EstimatorMode mode,
                                                const VectorXd& xddot) {
  ExternalWrenchEstimate out;
  out.mode = mode;
  out.Fx = gains.Dd * task.err_vel + gains.Kd * task.err_pos;
  if (mode == EstimatorMode::WithAcceleration) {
    if (xddot.size() != task.dim()) throw DimensionError("estimator needs a task acceleration");
    out.Fx += Lambda_c * (xddot - task.xddot_d);
  }
  return out;
}

VectorXd full_impedance_force_with_inertia_shaping(const TaskState& task,
                                                   const ImpedanceGains& gains,
                                                   const MatrixXd& Lambda_d,
                                                   const MatrixXd& Lambda_c,
                                                   const VectorXd& h_c,
                                                   const VectorXd& Fx_measured) {
  const Eigen::Index m = Lambda_c.rows();
  // Lambda_c Lambda_d^-1 == (Lambda_d^-1 Lambda_c)' for symmetric factors.
  const MatrixXd ratio = Lambda_d.ldlt().solve(Lambda_c).transpose();
  return h_c + Lambda_c * task.xddot_d -
         ratio * (gains.Dd * task.err_vel + gains.Kd * task.err_pos) +
         (ratio - MatrixXd::Identity(m, m)) * Fx_measured;
}

VectorXd posture_torque(const VectorXd& tau0, const MatrixXd& Jx, const MatrixXd& Lambda_c,
                        const MatrixXd& Mc_inv, const MatrixXd& P) {
  const VectorXd p_tau = P * tau0;
  return P * (tau0 - Jx.transpose() * (Lambda_c * (Jx * (Mc_inv * p_tau))));
}

MatrixXd critical_damping(const VectorXd& stiffness, const MatrixXd& Lambda, double ratio) {
  VectorXd d(stiffness.size());
  for (Eigen::Index i = 0; i < stiffness.size(); ++i) {
    d[i] = 2.0 * ratio * std::sqrt(stiffness[i] * std::max(Lambda(i, i), 1e-6));
  }
  return d.asDiagonal();
}

}  // namespace pidyn
