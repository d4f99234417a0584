#pragma once

#include <vector>

#include "pidyn/model.hpp"
#include "pidyn/types.hpp"

namespace pidyn {

struct JointState {
  VectorXd q;
  VectorXd qdot;
  double time = 0.0;
};

/// World frames of every link plus the operational point.
struct Kinematics {
  std::vector<Matrix3d> link_rotation;
  std::vector<Vector3d> link_position;   // joint i origin == link i origin
  std::vector<Vector3d> joint_axis;      // world-frame unit axes
  Pose ee;

  int dof() const { return static_cast<int>(link_rotation.size()); }
};

/// Per-state dynamics snapshot. Jx rows are [angular; linear].
struct DynamicsTerms {
  MatrixXd M;
  VectorXd h;
  MatrixXd Jx;
  MatrixXd Jx_dot;
  Pose ee_pose;
};

Kinematics forward_kinematics(const ManipulatorModel& model, const VectorXd& q);

/// Geometric Jacobian of a world point rigidly attached to link `link`.
/// Column j (j <= link) is [z_j; z_j x (point - p_j)].
MatrixXd point_jacobian(const Kinematics& kin, int link, const Vector3d& point);

MatrixXd jacobian(const ManipulatorModel& model, const VectorXd& q);

/// Time derivative of point_jacobian along qdot, for a point fixed on `link`.
MatrixXd point_jacobian_dot(const Kinematics& kin, const VectorXd& qdot, int link,
                            const Vector3d& point);

MatrixXd jacobian_dot(const ManipulatorModel& model, const VectorXd& q,
                      const VectorXd& qdot);

/// Composite-rigid-body joint-space inertia.
MatrixXd mass_matrix(const ManipulatorModel& model, const VectorXd& q);

/// Recursive Newton-Euler with zero joint acceleration: C(q, qdot) qdot + g(q).
VectorXd bias_forces(const ManipulatorModel& model, const VectorXd& q,
                     const VectorXd& qdot);

DynamicsTerms compute_dynamics(const ManipulatorModel& model, const JointState& state);

/// Kinetic energy 0.5 qdot' M qdot.
double kinetic_energy(const ManipulatorModel& model, const JointState& state);

/// Potential energy of all links in the model's gravity field.
double potential_energy(const ManipulatorModel& model, const VectorXd& q);

Matrix3d skew(const Vector3d& r);

/// Rotation vector (axis * angle, angle in [0, pi]) of a unit quaternion.
Vector3d rotation_vector(const Quaterniond& q);

}  // namespace pidyn
