#include "pidyn/grasp.hpp"

#include <fmt/format.h>

namespace pidyn {

Matrix6d grasp_matrix(const Vector3d& r) {
  Matrix6d g = Matrix6d::Identity();
  g.bottomLeftCorner<3, 3>() = skew(r);
  return g;
}

GraspMap grasp_map(const std::vector<ContactFrame>& contacts) {
  if (contacts.empty()) throw DimensionError("grasp_map needs at least one contact");
  GraspMap out;
  out.K = static_cast<int>(contacts.size());
  out.G.resize(6, 6 * out.K);
  for (int i = 0; i < out.K; ++i) {
    out.G_i.push_back(grasp_matrix(contacts[i].r));
    out.G.block<6, 6>(0, 6 * i) = out.G_i.back();
  }
  out.N_G = projector(out.G);
  return out;
}

MatrixXd to_contact_ordering(const MatrixXd& j) {
  MatrixXd out(j.rows(), j.cols());
  out.topRows(3) = j.middleRows(kLinear, 3);
  out.bottomRows(3) = j.middleRows(kAngular, 3);
  return out;
}

ConstraintSet multiarm_constraint_jacobian(const std::vector<ContactFrame>& contacts,
                                           const std::vector<Vector3d>& r_dot,
                                           const std::vector<MatrixXd>& arm_jacobians,
                                           const std::vector<MatrixXd>& arm_jacobian_dots,
                                           double rank_tol) {
  const int k = static_cast<int>(contacts.size());
  if (k == 0 || static_cast<int>(arm_jacobians.size()) != k ||
      static_cast<int>(arm_jacobian_dots.size()) != k || static_cast<int>(r_dot.size()) != k) {
    throw DimensionError("multiarm_constraint_jacobian: one Jacobian, derivative and r_dot per contact");
  }
  int n = 0;
  for (int i = 0; i < k; ++i) {
    if (arm_jacobians[i].rows() != 6 || arm_jacobian_dots[i].rows() != 6 ||
        arm_jacobian_dots[i].cols() != arm_jacobians[i].cols()) {
      throw DimensionError(fmt::format("arm {} Jacobian must be 6 x Q", i));
    }
    n += static_cast<int>(arm_jacobians[i].cols());
  }

  const GraspMap grasp = grasp_map(contacts);
  MatrixXd g_dot = MatrixXd::Zero(6, 6 * k);
  for (int i = 0; i < k; ++i) g_dot.block<3, 3>(3, 6 * i) = skew(r_dot[i]);
  const MatrixXd n_g_dot = projector_dot(grasp.G, g_dot, rank_tol);

  MatrixXd blk = MatrixXd::Zero(6 * k, n);
  MatrixXd blk_dot = MatrixXd::Zero(6 * k, n);
  for (int i = 0, col = 0; i < k; ++i) {
    const Eigen::Index q = arm_jacobians[i].cols();
    blk.block(6 * i, col, 6, q) = to_contact_ordering(arm_jacobians[i]);
    blk_dot.block(6 * i, col, 6, q) = to_contact_ordering(arm_jacobian_dots[i]);
    col += static_cast<int>(q);
  }

  ConstraintSet out;
  out.contacts = contacts;
  out.Jc_full = grasp.N_G * blk;
  out.Jc_full_dot = n_g_dot * blk + grasp.N_G * blk_dot;

  // Prune to the leading left singular directions. Rows of the reduced
  // Jacobian are U_r' Jc; the derivative drops U_r_dot, which only adds a
  // combination of the reduced rows and leaves the row space rate unchanged.
  Eigen::JacobiSVD<MatrixXd> svd(out.Jc_full, Eigen::ComputeThinU);
  const VectorXd& s = svd.singularValues();
  int rank = 0;
  if (s.size() > 0 && s[0] > 0.0) {
    while (rank < s.size() && s[rank] > rank_tol * s[0]) ++rank;
  }
  if (rank == 0) {
    throw RankDeficiencyError("grasp constraint Jacobian is zero (no internal wrench possible)",
                              0, 1);
  }
  out.wrench_basis = svd.matrixU().leftCols(rank);
  out.jacobian.Jc = out.wrench_basis.transpose() * out.Jc_full;
  out.jacobian.Jc_dot = out.wrench_basis.transpose() * out.Jc_full_dot;
  require_full_row_rank(out.jacobian.Jc, rank_tol);
  return out;
}

ConstraintSet surface_constraint(const ContactFrame& contact, const Matrix3d& surface_rotation,
                                 const MatrixXd& j, const MatrixXd& j_dot) {
  if (j.rows() != 6 || j_dot.rows() != 6 || j.cols() != j_dot.cols()) {
    throw DimensionError("surface_constraint: contact Jacobian must be 6 x Q");
  }
  const Vector3d t1 = surface_rotation.col(0);
  const Vector3d t2 = surface_rotation.col(1);
  const Vector3d normal = surface_rotation.col(2);
  MatrixXd sel = MatrixXd::Zero(3, 6);  // acts on [angular; linear]
  sel.block<1, 3>(0, kLinear) = normal.transpose();
  sel.block<1, 3>(1, kAngular) = t1.transpose();
  sel.block<1, 3>(2, kAngular) = t2.transpose();

  ConstraintSet out;
  out.contacts = {contact};
  out.jacobian.Jc = sel * j;
  out.jacobian.Jc_dot = sel * j_dot;
  out.wrench_basis = MatrixXd::Zero(6, 3);  // [f; m] world
  out.wrench_basis.block<3, 1>(0, 0) = normal;
  out.wrench_basis.block<3, 1>(3, 1) = t1;
  out.wrench_basis.block<3, 1>(3, 2) = t2;
  out.Jc_full = out.wrench_basis * out.jacobian.Jc;
  out.Jc_full_dot = out.wrench_basis * out.jacobian.Jc_dot;
  return out;
}

}  // namespace pidyn
