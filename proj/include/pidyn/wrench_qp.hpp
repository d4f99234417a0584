#pragma once

#include <vector>

#include "pidyn/grasp.hpp"
#include "pidyn/projection.hpp"
#include "pidyn/qp_solver.hpp"

namespace pidyn {

/// Contact friction model. mu: Coulomb coefficient; gamma: torsional
/// coefficient [m]; delta_x, delta_y: half-extents of the rectangular hand
/// patch along the contact-frame x and y axes [m].
struct FrictionParams {
  double mu = 0.5;
  double gamma = 0.02;
  double delta_x = 0.05;
  double delta_y = 0.03;

  void validate() const;
};

/// Rows C with C * [f; m] <= 0 for a wrench in the contact frame:
///   edges rows  cos(t_j) f_x + sin(t_j) f_y <= mu cos(pi/edges) f_z
///   -f_z <= 0,  |m_z| <= gamma f_z,  |m_x| <= delta_x f_z,  |m_y| <= delta_y f_z
/// The polygon is inscribed in the quadratic cone.
MatrixXd linearize_friction_cone(const FrictionParams& params, int edges = 8);

/// External wrench in the constraint space, as multipliers of the
/// full-row-rank constraint rows:
///   Jc^+' [ (I-P) M Mc^-1 (P tau - P h + P_dot qdot + P Jx' Fx) + (I-P) h - (I-P) Jx' Fx ]
/// `tau_motion` is the whole motion-space torque of the tick.
VectorXd aggregate_external_wrench(const ProjectionState& proj, const MatrixXd& M,
                                   const VectorXd& h, const VectorXd& qdot,
                                   const VectorXd& tau_motion, const MatrixXd& Jx,
                                   const VectorXd& Fx);

/// lambda_c = F_e - F_c, all stacked world contact wrenches [f; m] (6K).
struct WrenchDecomposition {
  VectorXd F_e;
  VectorXd F_c;
  VectorXd lambda_c;
};

/// QP over the commanded constraint multipliers mu (F_c = basis * mu):
///   minimise mu'(Jc Jc' + eps I) mu  s.t. cone rows on F_e - basis * mu.
/// eps = eps_scale * trace(Jc Jc') / 6K. A positive `margin` shrinks mu,
/// gamma and both patch extents by the factor (1 - margin).
QuadraticProgram build_commanded_wrench_qp(const ConstraintSet& constraint,
                                           const VectorXd& F_e_contacts,
                                           const FrictionParams& params, int edges = 8,
                                           double eps_scale = 1e-8, double margin = 0.0);

/// tau_constraint = Jc' F_c, which lies in range(I - P).
VectorXd constraint_torque(const VectorXd& F_c_multipliers, const MatrixXd& Jc);

/// Per-contact wrench [f; m] in the contact frame.
std::vector<Vector6d> contact_local_wrenches(const VectorXd& lambda_contacts,
                                             const std::vector<ContactFrame>& contacts);

/// Smallest slack of the exact (quadratic) contact conditions, normalised
/// by the wrench magnitude. Negative means the wrench leaves the cone.
double cone_margin(const Vector6d& local_wrench, const FrictionParams& params);

/// Exact friction, unilateral and moment conditions with an absolute tolerance.
bool satisfies_exact_cone(const Vector6d& local_wrench, const FrictionParams& params,
                          double tolerance = 1e-9);

}  // namespace pidyn
