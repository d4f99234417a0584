#include "pidyn/dynamics.hpp"

#include <cmath>

#include <fmt/format.h>

namespace pidyn {

namespace {

using SpatialVector = Vector6d;   // [angular; linear], Pluecker at world origin
using SpatialInertia = Matrix6d;

void check_size(const ManipulatorModel& model, const VectorXd& v, const char* what) {
  if (v.size() != model.dof()) {
    throw DimensionError(fmt::format("{} has length {}, model {} has {} joints", what,
                                     v.size(), model.name, model.dof()));
  }
}

SpatialVector cross_motion(const SpatialVector& v, const SpatialVector& m) {
  SpatialVector out;
  out.head<3>() = v.head<3>().cross(m.head<3>());
  out.tail<3>() = v.head<3>().cross(m.tail<3>()) + v.tail<3>().cross(m.head<3>());
  return out;
}

SpatialVector cross_force(const SpatialVector& v, const SpatialVector& f) {
  SpatialVector out;
  out.head<3>() = v.head<3>().cross(f.head<3>()) + v.tail<3>().cross(f.tail<3>());
  out.tail<3>() = v.head<3>().cross(f.tail<3>());
  return out;
}

// Inertia of a body about the world origin, given its world COM and world
// rotational inertia about the COM.
SpatialInertia spatial_inertia(double mass, const Vector3d& com, const Matrix3d& inertia_com) {
  const Matrix3d c = skew(com);
  SpatialInertia out;
  out.topLeftCorner<3, 3>() = inertia_com + mass * c * c.transpose();
  out.topRightCorner<3, 3>() = mass * c;
  out.bottomLeftCorner<3, 3>() = mass * c.transpose();
  out.bottomRightCorner<3, 3>() = mass * Matrix3d::Identity();
  return out;
}

SpatialVector motion_axis(const Kinematics& kin, int i) {
  SpatialVector s;
  s.head<3>() = kin.joint_axis[i];
  s.tail<3>() = kin.link_position[i].cross(kin.joint_axis[i]);
  return s;
}

std::vector<SpatialInertia> link_inertias(const ManipulatorModel& model, const Kinematics& kin) {
  std::vector<SpatialInertia> out;
  out.reserve(model.links.size());
  for (int i = 0; i < model.dof(); ++i) {
    const Link& l = model.links[i];
    const Matrix3d& r = kin.link_rotation[i];
    const Vector3d com = kin.link_position[i] + r * l.com;
    out.push_back(spatial_inertia(l.mass, com, r * l.inertia * r.transpose()));
  }
  return out;
}

}  // namespace

Matrix3d skew(const Vector3d& r) {
  Matrix3d s;
  s << 0.0, -r.z(), r.y(), r.z(), 0.0, -r.x(), -r.y(), r.x(), 0.0;
  return s;
}

Vector3d rotation_vector(const Quaterniond& q_in) {
  Quaterniond q = q_in;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double s = q.vec().norm();
  if (s < 1e-12) return 2.0 * q.vec();
  const double angle = 2.0 * std::atan2(s, q.w());
  return q.vec() * (angle / s);
}

Kinematics forward_kinematics(const ManipulatorModel& model, const VectorXd& q) {
  check_size(model, q, "q");
  Kinematics kin;
  const int n = model.dof();
  kin.link_rotation.resize(n);
  kin.link_position.resize(n);
  kin.joint_axis.resize(n);
  Matrix3d r = model.base.rotation();
  Vector3d p = model.base.position;
  for (int i = 0; i < n; ++i) {
    const Link& l = model.links[i];
    p = p + r * l.origin.position;
    r = r * l.origin.rotation() * Eigen::AngleAxisd(q[i], l.axis).toRotationMatrix();
    kin.link_rotation[i] = r;
    kin.link_position[i] = p;
    kin.joint_axis[i] = r * l.axis;
  }
  kin.ee.position = p + r * model.tool.position;
  kin.ee.orientation = Quaterniond(r * model.tool.rotation()).normalized();
  return kin;
}

MatrixXd point_jacobian(const Kinematics& kin, int link, const Vector3d& point) {
  MatrixXd j = MatrixXd::Zero(6, kin.dof());
  for (int i = 0; i <= link; ++i) {
    const Vector3d& z = kin.joint_axis[i];
    j.block<3, 1>(kAngular, i) = z;
    j.block<3, 1>(kLinear, i) = z.cross(point - kin.link_position[i]);
  }
  return j;
}

MatrixXd jacobian(const ManipulatorModel& model, const VectorXd& q) {
  const Kinematics kin = forward_kinematics(model, q);
  return point_jacobian(kin, model.dof() - 1, kin.ee.position);
}

MatrixXd point_jacobian_dot(const Kinematics& kin, const VectorXd& qdot, int link,
                            const Vector3d& point) {
  const int n = kin.dof();
  MatrixXd jd = MatrixXd::Zero(6, n);
  // Point velocity and per-joint origin velocities / link angular velocities.
  Vector3d v_point = Vector3d::Zero();
  for (int k = 0; k <= link; ++k) {
    v_point += kin.joint_axis[k].cross(point - kin.link_position[k]) * qdot[k];
  }
  Vector3d omega = Vector3d::Zero();
  for (int j = 0; j <= link; ++j) {
    const Vector3d& z = kin.joint_axis[j];
    const Vector3d& pj = kin.link_position[j];
    omega += z * qdot[j];
    Vector3d v_joint = Vector3d::Zero();
    for (int k = 0; k < j; ++k) {
      v_joint += kin.joint_axis[k].cross(pj - kin.link_position[k]) * qdot[k];
    }
    const Vector3d zdot = omega.cross(z);
    jd.block<3, 1>(kAngular, j) = zdot;
    jd.block<3, 1>(kLinear, j) = zdot.cross(point - pj) + z.cross(v_point - v_joint);
  }
  return jd;
}

MatrixXd jacobian_dot(const ManipulatorModel& model, const VectorXd& q,
                      const VectorXd& qdot) {
  check_size(model, qdot, "qdot");
  const Kinematics kin = forward_kinematics(model, q);
  return point_jacobian_dot(kin, qdot, model.dof() - 1, kin.ee.position);
}

MatrixXd mass_matrix(const ManipulatorModel& model, const VectorXd& q) {
  const Kinematics kin = forward_kinematics(model, q);
  const int n = model.dof();
  std::vector<SpatialInertia> composite = link_inertias(model, kin);
  for (int i = n - 1; i > 0; --i) composite[i - 1] += composite[i];

  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    const SpatialVector f = composite[i] * motion_axis(kin, i);
    for (int j = 0; j <= i; ++j) {
      m(i, j) = motion_axis(kin, j).dot(f);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

VectorXd bias_forces(const ManipulatorModel& model, const VectorXd& q,
                     const VectorXd& qdot) {
  check_size(model, qdot, "qdot");
  const Kinematics kin = forward_kinematics(model, q);
  const int n = model.dof();
  const std::vector<SpatialInertia> inertia = link_inertias(model, kin);

  SpatialVector v = SpatialVector::Zero();
  SpatialVector a = SpatialVector::Zero();
  a.tail<3>() = -model.gravity;
  std::vector<SpatialVector> f(n);
  for (int i = 0; i < n; ++i) {
    const SpatialVector s = motion_axis(kin, i);
    v += s * qdot[i];
    a += cross_motion(v, s) * qdot[i];
    f[i] = inertia[i] * a + cross_force(v, inertia[i] * v);
  }
  VectorXd h(n);
  for (int i = n - 1; i >= 0; --i) {
    h[i] = motion_axis(kin, i).dot(f[i]);
    if (i > 0) f[i - 1] += f[i];
  }
  return h;
}

DynamicsTerms compute_dynamics(const ManipulatorModel& model, const JointState& state) {
  check_size(model, state.q, "q");
  check_size(model, state.qdot, "qdot");
  const Kinematics kin = forward_kinematics(model, state.q);
  DynamicsTerms out;
  out.M = mass_matrix(model, state.q);
  out.h = bias_forces(model, state.q, state.qdot);
  out.Jx = point_jacobian(kin, model.dof() - 1, kin.ee.position);
  out.Jx_dot = point_jacobian_dot(kin, state.qdot, model.dof() - 1, kin.ee.position);
  out.ee_pose = kin.ee;
  return out;
}

double kinetic_energy(const ManipulatorModel& model, const JointState& state) {
  return 0.5 * state.qdot.dot(mass_matrix(model, state.q) * state.qdot);
}

double potential_energy(const ManipulatorModel& model, const VectorXd& q) {
  const Kinematics kin = forward_kinematics(model, q);
  double v = 0.0;
  for (int i = 0; i < model.dof(); ++i) {
    const Link& l = model.links[i];
    const Vector3d com = kin.link_position[i] + kin.link_rotation[i] * l.com;
    v -= l.mass * model.gravity.dot(com);
  }
  return v;
}

}  // namespace pidyn
