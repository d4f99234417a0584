#pragma once

#include <vector>

#include "pidyn/dynamics.hpp"
#include "pidyn/projection.hpp"
#include "pidyn/types.hpp"

namespace pidyn {

/// A contact between a hand and the environment.
///
/// `rotation` maps contact-frame vectors to world. Local z is the contact
/// normal pointing into the hand, so a pushing contact has f_z >= 0 in the
/// wrench the environment exerts on the robot. `r` is the contact position
/// relative to the grasped object's centre of mass (zero for surfaces).
struct ContactFrame {
  Vector3d position = Vector3d::Zero();
  Matrix3d rotation = Matrix3d::Identity();
  Vector3d r = Vector3d::Zero();
};

/// G_i = [I 0; [r]x I]: contact wrench [f; m] -> object wrench [f; m + r x f].
Matrix6d grasp_matrix(const Vector3d& r);

struct GraspMap {
  std::vector<Matrix6d> G_i;
  MatrixXd G;    // 6 x 6K
  MatrixXd N_G;  // 6K x 6K, I - G^+ G
  int K = 0;
};

GraspMap grasp_map(const std::vector<ContactFrame>& contacts);

/// Reorders Jacobian rows from [angular; linear] to [linear; angular], the
/// ordering dual to [force; moment] contact wrenches.
MatrixXd to_contact_ordering(const MatrixXd& jacobian);

/// Full-row-rank constraint on the stacked joint velocities plus the basis
/// that maps its multipliers into stacked world contact wrenches [f; m]:
/// lambda_contacts = wrench_basis * lambda.
struct ConstraintSet {
  ConstraintJacobian jacobian;
  MatrixXd wrench_basis;  // 6K x k, orthonormal columns
  std::vector<ContactFrame> contacts;
  MatrixXd Jc_full;       // 6K x n before row pruning (grasp constraints only)
  MatrixXd Jc_full_dot;

  int contact_count() const { return static_cast<int>(contacts.size()); }
};

/// Multi-arm rigid-grasp constraint Jc = (I - G^+ G) blockdiag(J_1 .. J_K).
///
/// `arm_jacobians` are 6 x Q_i contact-point Jacobians ([angular; linear],
/// world frame); `r_dot` the rates of the contact offsets. Rows are pruned by
/// SVD to full row rank; throws RankDeficiencyError if nothing remains.
ConstraintSet multiarm_constraint_jacobian(const std::vector<ContactFrame>& contacts,
                                           const std::vector<Vector3d>& r_dot,
                                           const std::vector<MatrixXd>& arm_jacobians,
                                           const std::vector<MatrixXd>& arm_jacobian_dots,
                                           double rank_tol = kDefaultRankTol);

/// Flat-surface contact holding the normal translation and both tilts:
/// rows [n . v; t1 . w; t2 . w] of the contact-point Jacobian, with the
/// surface axes (t1, t2, n) taken from `surface_rotation`.
ConstraintSet surface_constraint(const ContactFrame& contact, const Matrix3d& surface_rotation,
                                 const MatrixXd& contact_jacobian,
                                 const MatrixXd& contact_jacobian_dot);

}  // namespace pidyn
