#pragma once

#include "pidyn/types.hpp"

namespace pidyn {

/// Singular values below rank_tol * sigma_max are treated as zero.
inline constexpr double kDefaultRankTol = 1e-10;

struct PseudoInverse {
  MatrixXd pinv;
  int rank = 0;
  VectorXd singular_values;
};

/// Moore-Penrose pseudoinverse by SVD.
PseudoInverse pseudoinverse(const MatrixXd& a, double rank_tol = kDefaultRankTol);

/// k independent constraint rows on Q joint velocities and their derivative.
struct ConstraintJacobian {
  MatrixXd Jc;
  MatrixXd Jc_dot;

  int rows() const { return static_cast<int>(Jc.rows()); }
};

/// Effective row rank; throws RankDeficiencyError when below the row count.
int require_full_row_rank(const MatrixXd& jc, double rank_tol = kDefaultRankTol);

/// P = I - Jc^+ Jc. A constraint with zero rows yields the identity.
MatrixXd projector(const MatrixXd& jc, double rank_tol = kDefaultRankTol);

/// dP/dt for a full-row-rank Jc moving with Jc_dot.
MatrixXd projector_dot(const MatrixXd& jc, const MatrixXd& jc_dot,
                       double rank_tol = kDefaultRankTol);

struct ConstraintInertia {
  MatrixXd Mc;
  MatrixXd Mc_inv;
};

/// Mc = P M + I - P and its inverse.
ConstraintInertia constraint_inertia(const MatrixXd& M, const MatrixXd& P);

struct TaskSpaceTerms {
  MatrixXd Lambda_c;
  VectorXd h_c;
};

/// Constraint-consistent operational-space inertia and bias:
///   Lambda_c = (Jx Mc^-1 P Jx')^-1
///   h_c      = Lambda_c Jx Mc^-1 (P h - P_dot qdot) - Lambda_c Jx_dot qdot
/// Jx may be any task-row subset of an end-effector Jacobian.
/// Throws TaskSingularityError if the task is annihilated by the constraints.
TaskSpaceTerms task_space_terms(const MatrixXd& Jx, const MatrixXd& Jx_dot,
                                const MatrixXd& Mc_inv, const MatrixXd& P,
                                const MatrixXd& P_dot, const VectorXd& h,
                                const VectorXd& qdot);

/// Everything the controller and the simulator need for one tick.
struct ProjectionState {
  MatrixXd P;
  MatrixXd P_dot;
  MatrixXd Jc_pinv;
  MatrixXd Mc;
  MatrixXd Mc_inv;
  MatrixXd Lambda_c;
  VectorXd h_c;
};

/// Builds P, P_dot, Jc^+ and Mc. Task terms are filled only when Jx has rows.
ProjectionState compute_projection(const ConstraintJacobian& constraint, const MatrixXd& M,
                                   const VectorXd& h, const VectorXd& qdot,
                                   const MatrixXd& Jx, const MatrixXd& Jx_dot,
                                   double rank_tol = kDefaultRankTol);

}  // namespace pidyn
