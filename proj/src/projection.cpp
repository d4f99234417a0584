#include "pidyn/projection.hpp"

#include <fmt/format.h>

namespace pidyn {

PseudoInverse pseudoinverse(const MatrixXd& a, double rank_tol) {
  PseudoInverse out;
  if (a.rows() == 0 || a.cols() == 0) {
    out.pinv = MatrixXd::Zero(a.cols(), a.rows());
    return out;
  }
  if (!a.allFinite()) throw Error("pseudoinverse: non-finite matrix entries");
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  out.singular_values = s;
  const double threshold = rank_tol * (s.size() > 0 ? s[0] : 0.0);
  VectorXd s_inv = VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > threshold && s[i] > 0.0) {
      s_inv[i] = 1.0 / s[i];
      ++out.rank;
    }
  }
  out.pinv = svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
  return out;
}

int require_full_row_rank(const MatrixXd& jc, double rank_tol) {
  if (jc.rows() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(jc);
  const VectorXd& s = svd.singularValues();
  int rank = 0;
  if (s.size() > 0 && s[0] > 0.0) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s[i] > rank_tol * s[0]) ++rank;
    }
  }
  if (rank < jc.rows()) {
    throw RankDeficiencyError(
        fmt::format("constraint Jacobian has rank {} but {} rows", rank, jc.rows()), rank,
        static_cast<int>(jc.rows()));
  }
  return rank;
}

MatrixXd projector(const MatrixXd& jc, double rank_tol) {
  const Eigen::Index n = jc.cols();
  if (jc.rows() == 0) return MatrixXd::Identity(n, n);
  require_full_row_rank(jc, rank_tol);
  const MatrixXd p = MatrixXd::Identity(n, n) - pseudoinverse(jc, rank_tol).pinv * jc;
  return 0.5 * (p + p.transpose());
}

MatrixXd projector_dot(const MatrixXd& jc, const MatrixXd& jc_dot, double rank_tol) {
  const Eigen::Index n = jc.cols();
  if (jc.rows() == 0) return MatrixXd::Zero(n, n);
  if (jc_dot.rows() != jc.rows() || jc_dot.cols() != n) {
    throw DimensionError("projector_dot: Jc_dot shape differs from Jc");
  }
  require_full_row_rank(jc, rank_tol);
  const MatrixXd pinv = pseudoinverse(jc, rank_tol).pinv;
  const MatrixXd p = MatrixXd::Identity(n, n) - pinv * jc;
  const Eigen::LDLT<MatrixXd> gram(jc * jc.transpose());
  // d/dt(Jc^+) for full row rank.
  const MatrixXd pinv_dot =
      -pinv * jc_dot * pinv + p * gram.solve(jc_dot).transpose();
  return -pinv_dot * jc - pinv * jc_dot;
}

ConstraintInertia constraint_inertia(const MatrixXd& M, const MatrixXd& P) {
  if (M.rows() != M.cols() || P.rows() != M.rows() || P.cols() != M.cols()) {
    throw DimensionError("constraint_inertia: M and P must be square and equal size");
  }
  const Eigen::Index n = M.rows();
  ConstraintInertia out;
  out.Mc = P * M + MatrixXd::Identity(n, n) - P;
  const Eigen::PartialPivLU<MatrixXd> lu(out.Mc);
  if (!(lu.rcond() > 1e-14)) {
    throw SingularInertiaError(
        fmt::format("constraint-consistent inertia is singular (rcond {:.3g})", lu.rcond()));
  }
  out.Mc_inv = lu.inverse();
  return out;
}

TaskSpaceTerms task_space_terms(const MatrixXd& Jx, const MatrixXd& Jx_dot,
                                const MatrixXd& Mc_inv, const MatrixXd& P,
                                const MatrixXd& P_dot, const VectorXd& h,
                                const VectorXd& qdot) {
  const MatrixXd mc_inv_p = Mc_inv * P;
  MatrixXd inv_lambda = Jx * mc_inv_p * Jx.transpose();
  inv_lambda = 0.5 * (inv_lambda + inv_lambda.transpose());
  const Eigen::LDLT<MatrixXd> ldlt(inv_lambda);
  const VectorXd d = ldlt.vectorD();
  const double d_max = d.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(d_max > 0.0) || d.minCoeff() <= 1e-12 * d_max) {
    throw TaskSingularityError(
        "task Jacobian is singular in the motion space (Jx Mc^-1 P Jx' not invertible)");
  }
  TaskSpaceTerms out;
  const Eigen::Index m = Jx.rows();
  out.Lambda_c = ldlt.solve(MatrixXd::Identity(m, m));
  out.Lambda_c = 0.5 * (out.Lambda_c + out.Lambda_c.transpose());
  const VectorXd rhs = Jx * (Mc_inv * (P * h - P_dot * qdot)) - Jx_dot * qdot;
  out.h_c = ldlt.solve(rhs);
  return out;
}

ProjectionState compute_projection(const ConstraintJacobian& constraint, const MatrixXd& M,
                                   const VectorXd& h, const VectorXd& qdot,
                                   const MatrixXd& Jx, const MatrixXd& Jx_dot,
                                   double rank_tol) {
  ProjectionState out;
  const MatrixXd& jc = constraint.Jc;
  if (jc.cols() != M.cols()) {
    throw DimensionError(fmt::format("constraint Jacobian has {} columns, model has {} joints",
                                     jc.cols(), M.cols()));
  }
  out.P = projector(jc, rank_tol);
  out.P_dot = projector_dot(jc, constraint.Jc_dot, rank_tol);
  out.Jc_pinv = pseudoinverse(jc, rank_tol).pinv;
  ConstraintInertia ci = constraint_inertia(M, out.P);
  out.Mc = std::move(ci.Mc);
  out.Mc_inv = std::move(ci.Mc_inv);
  if (Jx.rows() > 0) {
    TaskSpaceTerms task = task_space_terms(Jx, Jx_dot, out.Mc_inv, out.P, out.P_dot, h, qdot);
    out.Lambda_c = std::move(task.Lambda_c);
    out.h_c = std::move(task.h_c);
  }
  return out;
}

}  // namespace pidyn
