#pragma once

#include <vector>

#include "pidyn/types.hpp"

namespace pidyn {

/// Desired stiffness and damping in task coordinates. The desired inertia is
/// implicitly the constraint-consistent Lambda_c.
struct ImpedanceGains {
  MatrixXd Kd;
  MatrixXd Dd;

  /// Throws ConfigError unless both are symmetric positive definite.
  void validate() const;
};

/// Row selection of a 6-dim [angular; linear] task, e.g. {2, 3, 4} for
/// yaw, x and y.
using TaskRows = std::vector<int>;

TaskRows full_task_rows();

/// [rotation vector of R R_d'; p - p_d], both in world coordinates.
Vector6d pose_error(const Pose& x, const Pose& x_d);

struct TaskState {
  Pose x;
  Pose x_d;
  VectorXd xdot;      // task-dim twist
  VectorXd xdot_d;
  VectorXd xddot_d;
  VectorXd err_pos;   // task-dim
  VectorXd err_vel;

  int dim() const { return static_cast<int>(err_pos.size()); }
};

/// Builds errors from full 6-dim quantities and keeps only `rows`.
TaskState make_task_state(const Pose& x, const Pose& x_d, const Vector6d& xdot,
                          const Vector6d& xdot_d, const Vector6d& xddot_d,
                          const TaskRows& rows);

MatrixXd select_rows(const MatrixXd& m, const TaskRows& rows);
VectorXd select_rows(const VectorXd& v, const TaskRows& rows);

/// F = h_c + Lambda_c xddot_d - Dd err_vel - Kd err_pos
VectorXd control_force(const TaskState& task, const ImpedanceGains& gains,
                       const MatrixXd& Lambda_c, const VectorXd& h_c);

/// tau_motion = P Jx' F
VectorXd motion_torque(const VectorXd& F, const MatrixXd& Jx, const MatrixXd& P);

enum class EstimatorMode { QuasiStatic, WithAcceleration };

struct ExternalWrenchEstimate {
  VectorXd Fx;
  EstimatorMode mode = EstimatorMode::QuasiStatic;
};

/// Fx = Lambda_c (xddot - xddot_d) + Dd err_vel + Kd err_pos. In quasi-static
/// mode the inertial term is dropped and `xddot` is ignored.
ExternalWrenchEstimate estimate_external_wrench(const TaskState& task,
                                                const ImpedanceGains& gains,
                                                const MatrixXd& Lambda_c,
                                                EstimatorMode mode = EstimatorMode::QuasiStatic,
                                                const VectorXd& xddot = VectorXd());

/// Impedance law with inertia shaping and force feedback:
///   F = h_c + Lambda_c xddot_d - Lambda_c Lambda_d^-1 (Dd err_vel + Kd err_pos)
///       + (Lambda_c Lambda_d^-1 - I) Fx
/// Equals control_force when Lambda_d == Lambda_c.
VectorXd full_impedance_force_with_inertia_shaping(const TaskState& task,
                                                   const ImpedanceGains& gains,
                                                   const MatrixXd& Lambda_d,
                                                   const MatrixXd& Lambda_c,
                                                   const VectorXd& h_c,
                                                   const VectorXd& Fx_measured);

/// Joint torque that leaves the task acceleration untouched:
///   P (I - Jx' Lambda_c Jx Mc^-1 P) tau0
VectorXd posture_torque(const VectorXd& tau0, const MatrixXd& Jx, const MatrixXd& Lambda_c,
                        const MatrixXd& Mc_inv, const MatrixXd& P);

/// Critically damped gains D = 2 sqrt(K Lambda) per axis from diag(Lambda).
MatrixXd critical_damping(const VectorXd& stiffness, const MatrixXd& Lambda,
                          double ratio = 1.0);

}  // namespace pidyn
