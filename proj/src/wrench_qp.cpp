#include "pidyn/wrench_qp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace pidyn {

void FrictionParams::validate() const {
  if (!(mu > 0.0)) throw ConfigError("friction.mu", "must be positive");
  if (!(gamma > 0.0)) throw ConfigError("friction.gamma", "must be positive");
  if (!(delta_x > 0.0)) throw ConfigError("friction.delta_x", "must be positive");
  if (!(delta_y > 0.0)) throw ConfigError("friction.delta_y", "must be positive");
}

MatrixXd linearize_friction_cone(const FrictionParams& params, int edges) {
  if (edges < 3) throw Error(fmt::format("friction cone needs at least 3 edges, got {}", edges));
  params.validate();
  MatrixXd rows = MatrixXd::Zero(edges + 7, 6);
  const double inner = params.mu * std::cos(std::numbers::pi / edges);
  for (int j = 0; j < edges; ++j) {
    const double theta = 2.0 * std::numbers::pi * j / edges;
    rows(j, 0) = std::cos(theta);
    rows(j, 1) = std::sin(theta);
    rows(j, 2) = -inner;
  }
  int r = edges;
  rows(r++, 2) = -1.0;
  const std::array<std::pair<int, double>, 3> moment_limits{
      {{5, params.gamma}, {3, params.delta_x}, {4, params.delta_y}}};
  for (const auto& [axis, limit] : moment_limits) {
    rows(r, axis) = 1.0;
    rows(r++, 2) = -limit;
    rows(r, axis) = -1.0;
    rows(r++, 2) = -limit;
  }
  return rows;
}

VectorXd aggregate_external_wrench(const ProjectionState& proj, const MatrixXd& M,
                                   const VectorXd& h, const VectorXd& qdot,
                                   const VectorXd& tau_motion, const MatrixXd& Jx,
                                   const VectorXd& Fx) {
  const Eigen::Index n = M.rows();
  const MatrixXd i_minus_p = MatrixXd::Identity(n, n) - proj.P;
  VectorXd disturbance = VectorXd::Zero(n);
  if (Jx.rows() > 0 && Fx.size() > 0) disturbance = Jx.transpose() * Fx;
  const VectorXd qddot_free = proj.Mc_inv * (proj.P * tau_motion - proj.P * h +
                                             proj.P_dot * qdot + proj.P * disturbance);
  const VectorXd joint = i_minus_p * (M * qddot_free) + i_minus_p * h - i_minus_p * disturbance;
  return proj.Jc_pinv.transpose() * joint;
}

QuadraticProgram build_commanded_wrench_qp(const ConstraintSet& constraint,
                                           const VectorXd& F_e_contacts,
                                           const FrictionParams& params, int edges,
                                           double eps_scale, double margin) {
  const MatrixXd& basis = constraint.wrench_basis;
  const int contacts = constraint.contact_count();
  if (basis.rows() != 6 * contacts || F_e_contacts.size() != 6 * contacts) {
    throw DimensionError("wrench QP: basis and F_e must have 6K rows");
  }
  if (margin < 0.0 || margin >= 1.0) throw Error("cone margin must lie in [0, 1)");
  FrictionParams tight = params;
  tight.mu *= 1.0 - margin;
  tight.gamma *= 1.0 - margin;
  tight.delta_x *= 1.0 - margin;
  tight.delta_y *= 1.0 - margin;
  const MatrixXd cone = linearize_friction_cone(tight, edges);
  const Eigen::Index per_contact = cone.rows();
  // World [f; m] -> contact-frame cone rows.
  MatrixXd world_rows = MatrixXd::Zero(per_contact * contacts, 6 * contacts);
  for (int i = 0; i < contacts; ++i) {
    Matrix6d to_local = Matrix6d::Zero();
    const Matrix3d rt = constraint.contacts[i].rotation.transpose();
    to_local.topLeftCorner<3, 3>() = rt;
    to_local.bottomRightCorner<3, 3>() = rt;
    world_rows.block(per_contact * i, 6 * i, per_contact, 6) = cone * to_local;
  }

  const MatrixXd& jc = constraint.jacobian.Jc;
  QuadraticProgram qp;
  const MatrixXd gram = jc * jc.transpose();
  const double eps = eps_scale * gram.trace() / (6.0 * contacts);
  // The objective mu'(Jc Jc')mu is written as 0.5 mu' H mu with H = 2 (Jc Jc' + eps I).
  qp.H = 2.0 * (gram + eps * MatrixXd::Identity(gram.rows(), gram.cols()));
  qp.g = VectorXd::Zero(gram.rows());
  // C (F_e - B mu) <= 0  <=>  (-C B) mu <= -C F_e
  qp.A = -world_rows * basis;
  qp.b = -world_rows * F_e_contacts;
  return qp;
}

VectorXd constraint_torque(const VectorXd& F_c_multipliers, const MatrixXd& Jc) {
  if (F_c_multipliers.size() != Jc.rows()) {
    throw DimensionError("constraint_torque: one multiplier per constraint row");
  }
  return Jc.transpose() * F_c_multipliers;
}

std::vector<Vector6d> contact_local_wrenches(const VectorXd& lambda,
                                             const std::vector<ContactFrame>& contacts) {
  if (lambda.size() != 6 * static_cast<Eigen::Index>(contacts.size())) {
    throw DimensionError("contact wrench vector must have 6K entries");
  }
  std::vector<Vector6d> out;
  out.reserve(contacts.size());
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const Matrix3d rt = contacts[i].rotation.transpose();
    Vector6d w;
    w.head<3>() = rt * lambda.segment<3>(6 * i);
    w.tail<3>() = rt * lambda.segment<3>(6 * i + 3);
    out.push_back(w);
  }
  return out;
}

double cone_margin(const Vector6d& w, const FrictionParams& p) {
  const double fz = w[2];
  const double slacks[] = {
      fz,
      p.mu * fz - std::hypot(w[0], w[1]),
      p.gamma * fz - std::abs(w[5]),
      p.delta_x * fz - std::abs(w[3]),
      p.delta_y * fz - std::abs(w[4]),
  };
  return *std::min_element(std::begin(slacks), std::end(slacks)) / std::max(1.0, w.norm());
}

bool satisfies_exact_cone(const Vector6d& w, const FrictionParams& p, double tolerance) {
  const double fz = w[2];
  return fz >= -tolerance && std::hypot(w[0], w[1]) <= p.mu * fz + tolerance &&
         std::abs(w[5]) <= p.gamma * fz + tolerance &&
         std::abs(w[3]) <= p.delta_x * fz + tolerance &&
         std::abs(w[4]) <= p.delta_y * fz + tolerance;
}

}  // namespace pidyn
