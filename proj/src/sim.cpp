#include "pidyn/sim.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace pidyn {

namespace {

MatrixXd block_diagonal(const std::vector<MatrixXd>& blocks) {
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.rows();
  MatrixXd out = MatrixXd::Zero(n, n);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.block(at, at, b.rows(), b.cols()) = b;
    at += b.rows();
  }
  return out;
}

Matrix3d yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vector3d::UnitZ()).toRotationMatrix();
}

// Object frame from arm 0's hand.
Pose object_pose(const SystemLayout& layout, const Pose& hand0) {
  return compose(hand0, inverse(layout.hand_in_object.front()));
}

}  // namespace

Matrix3d GraspedObject::inertia(double total_mass) const {
  const double x2 = dims.x() * dims.x();
  const double y2 = dims.y() * dims.y();
  const double z2 = dims.z() * dims.z();
  return (total_mass / 12.0) * Vector3d(y2 + z2, x2 + z2, x2 + y2).asDiagonal().toDenseMatrix();
}

int SystemLayout::dof() const {
  int n = 0;
  for (const auto& a : arms) n += a.dof();
  return n;
}

std::vector<int> SystemLayout::arm_offsets() const {
  std::vector<int> out;
  int at = 0;
  for (const auto& a : arms) {
    out.push_back(at);
    at += a.dof();
  }
  return out;
}

SystemSnapshot make_snapshot(const SystemLayout& layout,
                             const std::vector<ManipulatorModel>& models,
                             const JointState& state) {
  const int n = layout.dof();
  if (state.q.size() != n || state.qdot.size() != n) {
    throw DimensionError(fmt::format("system state must have {} joints", n));
  }
  if (models.size() != layout.arms.size()) {
    throw DimensionError("one model per arm is required");
  }
  const auto offsets = layout.arm_offsets();
  const std::size_t arms = models.size();

  SystemSnapshot s;
  std::vector<MatrixXd> masses;
  s.dyn.h.resize(n);
  std::vector<Vector6d> twists;
  for (std::size_t i = 0; i < arms; ++i) {
    const int q_i = models[i].dof();
    const VectorXd q = state.q.segment(offsets[i], q_i);
    const VectorXd qd = state.qdot.segment(offsets[i], q_i);
    s.kin.push_back(forward_kinematics(models[i], q));
    const Kinematics& kin = s.kin.back();
    const int tip = kin.dof() - 1;
    s.contact_jacobians.push_back(point_jacobian(kin, tip, kin.ee.position));
    s.contact_jacobian_dots.push_back(point_jacobian_dot(kin, qd, tip, kin.ee.position));
    twists.push_back(s.contact_jacobians.back() * qd);
    masses.push_back(mass_matrix(models[i], q));
    s.dyn.h.segment(offsets[i], q_i) = bias_forces(models[i], q, qd);
  }
  s.dyn.M = block_diagonal(masses);

  if (layout.type == ConstraintType::SurfaceContact) {
    if (arms != 1) throw DimensionError("surface contact uses a single arm");
    const Kinematics& kin = s.kin.front();
    const Matrix3d& surface = layout.surface_rotation;
    const Vector3d hand_x = kin.ee.rotation().col(0);
    const double yaw = std::atan2(surface.col(1).dot(hand_x), surface.col(0).dot(hand_x));
    ContactFrame contact;
    contact.position = kin.ee.position;
    contact.rotation = surface * yaw_rotation(yaw);
    s.constraint = surface_constraint(contact, surface, s.contact_jacobians.front(),
                                      s.contact_jacobian_dots.front());
    s.dyn.Jx = s.contact_jacobians.front();
    s.dyn.Jx_dot = s.contact_jacobian_dots.front();
    s.dyn.ee_pose = kin.ee;
    s.task_twist = twists.front();
    return s;
  }

  if (layout.hand_in_object.size() != arms || layout.contact_rotations.size() != arms) {
    throw DimensionError("grasp layout needs one hand pose and contact frame per arm");
  }
  const Pose object = object_pose(layout, s.kin.front().ee);
  const Matrix3d r_obj = object.rotation();
  const Vector3d omega = twists.front().segment<3>(kAngular);
  const Vector3d r0 = s.kin.front().ee.position - object.position;
  const Vector3d v_com = twists.front().segment<3>(kLinear) - omega.cross(r0);

  std::vector<ContactFrame> contacts;
  std::vector<Vector3d> r_dot;
  for (std::size_t i = 0; i < arms; ++i) {
    ContactFrame c;
    c.position = s.kin[i].ee.position;
    c.rotation = r_obj * layout.contact_rotations[i];
    c.r = c.position - object.position;
    contacts.push_back(c);
    r_dot.push_back(twists[i].segment<3>(kLinear) - v_com);
  }
  s.constraint = multiarm_constraint_jacobian(contacts, r_dot, s.contact_jacobians,
                                              s.contact_jacobian_dots);
  s.grasp = grasp_map(contacts);

  // Object twist [w; v_com] = 0.5 * sum_i T_i J_i qdot, T_i = [I 0; [r_i]x I].
  s.dyn.Jx = MatrixXd::Zero(6, n);
  s.dyn.Jx_dot = MatrixXd::Zero(6, n);
  const double share = 1.0 / static_cast<double>(arms);
  for (std::size_t i = 0; i < arms; ++i) {
    Matrix6d t = Matrix6d::Identity();
    t.block<3, 3>(kLinear, kAngular) = skew(contacts[i].r);
    Matrix6d t_dot = Matrix6d::Zero();
    t_dot.block<3, 3>(kLinear, kAngular) = skew(r_dot[i]);
    const int q_i = models[i].dof();
    s.dyn.Jx.middleCols(offsets[i], q_i) = share * t * s.contact_jacobians[i];
    s.dyn.Jx_dot.middleCols(offsets[i], q_i) =
        share * (t_dot * s.contact_jacobians[i] + t * s.contact_jacobian_dots[i]);
  }
  s.dyn.ee_pose = object;
  s.task_twist = s.dyn.Jx * state.qdot;
  return s;
}

VectorXd constrained_acceleration(const DynamicsTerms& dyn, const ProjectionState& proj,
                                  const VectorXd& qdot, const VectorXd& tau,
                                  const VectorXd& Fx) {
  VectorXd rhs = proj.P * (tau - dyn.h) + proj.P_dot * qdot;
  if (Fx.size() > 0) rhs += proj.P * (dyn.Jx.transpose() * Fx);
  return proj.Mc_inv * rhs;
}

VectorXd true_constraint_force(const DynamicsTerms& dyn, const ProjectionState& proj,
                               const VectorXd& tau, const VectorXd& Fx,
                               const VectorXd& qddot) {
  VectorXd residual = dyn.M * qddot + dyn.h - tau;
  if (Fx.size() > 0) residual -= dyn.Jx.transpose() * Fx;
  const Eigen::Index n = residual.size();
  return proj.Jc_pinv.transpose() * ((MatrixXd::Identity(n, n) - proj.P) * residual);
}

double DisturbanceSegment::weight(double t) const {
  if (ramp <= 0.0) return active(t) ? 1.0 : 0.0;
  const double overlap = std::min(t, t_end) - std::max(t - ramp, t_start);
  return std::clamp(overlap / ramp, 0.0, 1.0);
}

void DisturbanceProfile::validate() const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& a = segments[i];
    const std::string field = fmt::format("disturbances[{}]", i);
    if (!(a.t_end > a.t_start)) throw ConfigError(field, "end time must follow start time");
    if (a.ramp < 0.0) throw ConfigError(field + ".ramp", "must be non-negative");
    if (a.type == DisturbanceType::AddedMass && a.mass < 0.0) {
      throw ConfigError(field + ".mass", "must be non-negative");
    }
    if (a.type == DisturbanceType::PoseClamp && (a.stiffness <= 0.0 || a.damping < 0.0)) {
      throw ConfigError(field, "clamp stiffness must be positive and damping non-negative");
    }
    if (a.type == DisturbanceType::WrenchNoise && a.noise_std < 0.0) {
      throw ConfigError(field + ".std", "must be non-negative");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const auto& b = segments[j];
      if (a.type == b.type && a.t_start < b.t_end && b.t_start < a.t_end) {
        throw ConfigError(field, fmt::format("overlaps disturbances[{}] of the same type", j));
      }
    }
  }
}

DisturbanceInjector::DisturbanceInjector(DisturbanceProfile profile, unsigned seed)
    : profile_(std::move(profile)), rng_(seed) {
  profile_.validate();
}

DisturbanceSample DisturbanceInjector::sample(double t, const Pose& task_pose,
                                              const Vector6d& task_twist) {
  DisturbanceSample out;
  for (std::size_t i = 0; i < profile_.segments.size(); ++i) {
    const auto& seg = profile_.segments[i];
    switch (seg.type) {
      case DisturbanceType::ConstantWrench:
        out.wrench += seg.weight(t) * seg.wrench;
        continue;
      case DisturbanceType::AddedMass:
        out.added_mass += seg.weight(t) * seg.mass;
        continue;
      default:
        break;
    }
    const bool engaged = seg.type == DisturbanceType::PoseClamp ? seg.weight(t) > 0.0 || seg.active(t)
                                                                 : seg.active(t);
    if (!engaged) continue;
    switch (seg.type) {
      case DisturbanceType::ConstantWrench:
      case DisturbanceType::AddedMass:
        break;
      case DisturbanceType::PoseClamp: {
        const auto [it, inserted] = anchors_.try_emplace(i, task_pose.position);
        out.wrench.segment<3>(kLinear) +=
            seg.weight(t) * (-seg.stiffness * (task_pose.position - it->second) -
                             seg.damping * task_twist.segment<3>(kLinear));
        out.clamped = true;
        break;
      }
      case DisturbanceType::WrenchNoise: {
        std::normal_distribution<double> noise(0.0, seg.noise_std);
        for (int k = 0; k < 3; ++k) out.wrench[kLinear + k] += noise(rng_);
        break;
      }
    }
  }
  return out;
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("integrator.dt", "must be positive");
  if (!(drift_tolerance > 0.0)) throw ConfigError("integrator.drift_tolerance", "must be positive");
}

SimEngine::SimEngine(SystemLayout layout, IntegratorConfig config, double extra_mass)
    : layout_(std::move(layout)), config_(config), extra_mass_(extra_mass) {
  config_.validate();
  if (layout_.arms.empty()) throw DimensionError("layout has no arms");
  models_ = loaded_models(layout_, extra_mass_);
}

void SimEngine::set_extra_mass(double extra_mass) {
  if (extra_mass == extra_mass_) return;
  extra_mass_ = extra_mass;
  models_ = loaded_models(layout_, extra_mass_);
}

SimEngine::Evaluation SimEngine::evaluate(const JointState& state, const VectorXd& tau,
                                          const VectorXd& Fx) const {
  Evaluation e;
  e.snapshot = make_snapshot(layout_, models_, state);
  const DynamicsTerms& dyn = e.snapshot.dyn;
  e.projection = compute_projection(e.snapshot.constraint.jacobian, dyn.M, dyn.h, state.qdot,
                                    MatrixXd(), MatrixXd());
  e.qddot = constrained_acceleration(dyn, e.projection, state.qdot, tau, Fx);
  e.lambda = true_constraint_force(dyn, e.projection, tau, Fx, e.qddot);
  e.contact_wrenches = e.snapshot.constraint.wrench_basis * e.lambda;

  if (layout_.type == ConstraintType::GraspMap) {
    // Each hand also carries its lumped share of the object.
    const std::size_t arms = layout_.arms.size();
    const double share = 1.0 / static_cast<double>(arms);
    const Vector6d accel = dyn.Jx * e.qddot + dyn.Jx_dot * state.qdot;
    const Vector3d alpha = accel.segment<3>(kAngular);
    const Vector3d a_com = accel.segment<3>(kLinear);
    const Vector3d omega = e.snapshot.task_twist.segment<3>(kAngular);
    const double total = layout_.object.mass + extra_mass_;
    const double part_mass = share * total;
    const Matrix3d r_obj = dyn.ee_pose.rotation();
    const Matrix3d inertia = share * r_obj * layout_.object.inertia(total) * r_obj.transpose();
    const Vector3d gravity = layout_.arms.front().gravity;
    Vector3d force = part_mass * (gravity - a_com);
    Vector3d moment = -(inertia * alpha + omega.cross(inertia * omega));
    if (Fx.size() == 6) {
      force += share * Fx.segment<3>(kLinear);
      moment += share * Fx.segment<3>(kAngular);
    }
    for (std::size_t i = 0; i < arms; ++i) {
      const Vector3d& r = e.snapshot.constraint.contacts[i].r;
      e.contact_wrenches.segment<3>(6 * i) += force;
      e.contact_wrenches.segment<3>(6 * i + 3) += moment - r.cross(force);
    }
  }
  return e;
}

VectorXd SimEngine::acceleration(const JointState& state, const VectorXd& tau,
                                 const VectorXd& Fx) const {
  const SystemSnapshot s = make_snapshot(layout_, models_, state);
  const ProjectionState proj = compute_projection(s.constraint.jacobian, s.dyn.M, s.dyn.h,
                                                  state.qdot, MatrixXd(), MatrixXd());
  return constrained_acceleration(s.dyn, proj, state.qdot, tau, Fx);
}

VectorXd SimEngine::position_error(const VectorXd& q) const {
  JointState st{q, VectorXd::Zero(q.size()), 0.0};
  const SystemSnapshot s = make_snapshot(layout_, layout_.arms, st);
  if (layout_.type == ConstraintType::SurfaceContact) {
    const Matrix3d& surface = layout_.surface_rotation;
    const Vector3d n = surface.col(2);
    const Pose& ee = s.kin.front().ee;
    const Vector3d tilt = (-n).cross(ee.rotation().col(2));
    return Eigen::Vector3d(n.dot(ee.position) - layout_.surface_height,
                           surface.col(0).dot(tilt), surface.col(1).dot(tilt));
  }
  const Pose object = s.dyn.ee_pose;
  VectorXd err(6 * (layout_.arms.size() - 1));
  for (std::size_t i = 1; i < layout_.arms.size(); ++i) {
    const Pose target = compose(object, layout_.hand_in_object[i]);
    const Pose& hand = s.kin[i].ee;
    err.segment<3>(6 * (i - 1)) =
        rotation_vector(hand.orientation * target.orientation.conjugate());
    err.segment<3>(6 * (i - 1) + 3) = hand.position - target.position;
  }
  return err;
}

VectorXd SimEngine::correct_position(const VectorXd& q_in) const {
  VectorXd q = q_in;
  const auto offsets = layout_.arm_offsets();
  for (int iter = 0; iter < 8; ++iter) {
    const VectorXd err = position_error(q);
    if (err.size() == 0 || err.norm() < 1e-13) break;
    JointState st{q, VectorXd::Zero(q.size()), 0.0};
    const SystemSnapshot s = make_snapshot(layout_, layout_.arms, st);
    MatrixXd jac;
    if (layout_.type == ConstraintType::SurfaceContact) {
      jac = s.constraint.jacobian.Jc;
    } else {
      // Relative motion of hand i against the hand-0-carried target.
      const int q0 = layout_.arms.front().dof();
      const MatrixXd& j0 = s.contact_jacobians.front();
      const Pose object = s.dyn.ee_pose;
      jac = MatrixXd::Zero(err.size(), q.size());
      for (std::size_t i = 1; i < layout_.arms.size(); ++i) {
        const Pose target = compose(object, layout_.hand_in_object[i]);
        const Vector3d d = target.position - s.kin.front().ee.position;
        const int row = 6 * static_cast<int>(i - 1);
        const MatrixXd& ji = s.contact_jacobians[i];
        jac.block(row, offsets[i], 6, ji.cols()) = ji;
        jac.block(row, 0, 3, q0) -= j0.topRows(3);
        jac.block(row + 3, 0, 3, q0) -= j0.bottomRows(3) - skew(d) * j0.topRows(3);
      }
    }
    q -= pseudoinverse(jac).pinv * err;
  }
  return q;
}

JointState SimEngine::step(const JointState& state, const VectorXd& tau, const VectorXd& Fx,
                           double* drift) const {
  const double dt = config_.dt;
  JointState next;
  next.time = state.time + dt;
  if (config_.method == IntegrationMethod::SemiImplicitEuler) {
    const VectorXd qdd = acceleration(state, tau, Fx);
    next.qdot = state.qdot + dt * qdd;
    next.q = state.q + dt * next.qdot;
  } else {
    auto deriv = [&](const VectorXd& q, const VectorXd& qd) {
      return acceleration(JointState{q, qd, state.time}, tau, Fx);
    };
    const VectorXd& q = state.q;
    const VectorXd& v = state.qdot;
    const VectorXd a1 = deriv(q, v);
    const VectorXd v2 = v + 0.5 * dt * a1;
    const VectorXd a2 = deriv(q + 0.5 * dt * v, v2);
    const VectorXd v3 = v + 0.5 * dt * a2;
    const VectorXd a3 = deriv(q + 0.5 * dt * v2, v3);
    const VectorXd v4 = v + dt * a3;
    const VectorXd a4 = deriv(q + dt * v3, v4);
    next.q = q + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
    next.qdot = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  }
  if (!next.q.allFinite() || !next.qdot.allFinite()) {
    throw IntegrationError(fmt::format("non-finite state at t = {}", next.time));
  }

  if (config_.position_correction) next.q = correct_position(next.q);
  const SystemSnapshot s = make_snapshot(layout_, layout_.arms, next);
  const MatrixXd& jc = s.constraint.jacobian.Jc;
  const double gain = config_.baumgarte_gain > 0.0 ? std::min(1.0, config_.baumgarte_gain * dt) : 1.0;
  next.qdot -= gain * (pseudoinverse(jc).pinv * (jc * next.qdot));
  const double residual = (jc * next.qdot).norm();
  if (drift) *drift = residual;
  if (residual > config_.drift_tolerance) {
    throw IntegrationError(fmt::format("constraint velocity drift {:.3e} exceeds {:.3e} at t = {}",
                                       residual, config_.drift_tolerance, next.time));
  }
  return next;
}

std::vector<ManipulatorModel> loaded_models(const SystemLayout& layout, double extra_mass) {
  std::vector<ManipulatorModel> out;
  if (layout.type == ConstraintType::SurfaceContact) {
    for (const auto& arm : layout.arms) {
      out.push_back(arm.with_payload(extra_mass, arm.tool.position, Matrix3d::Zero()));
    }
    return out;
  }
  const double share = 1.0 / static_cast<double>(layout.arms.size());
  const double total = layout.object.mass + extra_mass;
  for (std::size_t i = 0; i < layout.arms.size(); ++i) {
    const ManipulatorModel& arm = layout.arms[i];
    const Pose object_in_link = compose(arm.tool, inverse(layout.hand_in_object[i]));
    const Matrix3d rot = object_in_link.rotation();
    const Matrix3d inertia = share * rot * layout.object.inertia(total) * rot.transpose();
    out.push_back(arm.with_payload(share * total, object_in_link.position, inertia));
  }
  return out;
}

}  // namespace pidyn
