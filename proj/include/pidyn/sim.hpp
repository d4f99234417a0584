#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "pidyn/dynamics.hpp"
#include "pidyn/grasp.hpp"
#include "pidyn/projection.hpp"

namespace pidyn {

enum class ConstraintType { SurfaceContact, GraspMap };

/// Rigid object held by several hands. Geometry is expressed in the object
/// frame, whose origin is the centre of mass.
struct GraspedObject {
  Vector3d dims{0.20, 0.30, 0.40};
  double mass = 0.700;

  /// Solid-box rotational inertia about the COM for `total_mass`.
  Matrix3d inertia(double total_mass) const;
};

/// The arms, their coupling and the task point, independent of which
/// inertial parameters are used to evaluate the dynamics.
struct SystemLayout {
  ConstraintType type = ConstraintType::SurfaceContact;
  std::vector<ManipulatorModel> arms;
  Matrix3d surface_rotation = Matrix3d::Identity();  // surface axes (t1, t2, n)
  double surface_height = 0.0;                       // along n
  // Surface contact: the tool z axis is held anti-parallel to n.
  GraspedObject object;
  std::vector<Pose> hand_in_object;          // each tool frame in the object frame
  std::vector<Matrix3d> contact_rotations;   // contact frames in the object frame

  int dof() const;
  std::vector<int> arm_offsets() const;
};

/// Kinematic and dynamic quantities of the whole system at one state.
///
/// `dyn.Jx` / `dyn.Jx_dot` are the full 6-row task-point Jacobian (hand for
/// surface contact, object COM for grasps), `dyn.ee_pose` the task pose.
struct SystemSnapshot {
  std::vector<Kinematics> kin;
  std::vector<MatrixXd> contact_jacobians;
  std::vector<MatrixXd> contact_jacobian_dots;
  DynamicsTerms dyn;
  Vector6d task_twist = Vector6d::Zero();
  ConstraintSet constraint;
  GraspMap grasp;  // grasp constraints only
};

/// Evaluates kinematics, constraint and task terms with `models` providing
/// the inertial parameters (their kinematics must match the layout).
SystemSnapshot make_snapshot(const SystemLayout& layout,
                             const std::vector<ManipulatorModel>& models,
                             const JointState& state);

/// qddot = Mc^-1 (P tau - P h + P_dot qdot + P Jx' Fx). `dyn.Jx` is the
/// Jacobian at which Fx acts.
VectorXd constrained_acceleration(const DynamicsTerms& dyn, const ProjectionState& proj,
                                  const VectorXd& qdot, const VectorXd& tau,
                                  const VectorXd& Fx);

/// Constraint multipliers from the constrained-space balance:
///   Jc^+' (I - P)(M qddot + h - tau - Jx' Fx)
VectorXd true_constraint_force(const DynamicsTerms& dyn, const ProjectionState& proj,
                               const VectorXd& tau, const VectorXd& Fx,
                               const VectorXd& qddot);

enum class DisturbanceType { ConstantWrench, AddedMass, PoseClamp, WrenchNoise };

struct DisturbanceSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  DisturbanceType type = DisturbanceType::ConstantWrench;
  Vector6d wrench = Vector6d::Zero();  // [moment; force], world, at the task point
  double mass = 0.0;                   // kg, added at the task point
  double stiffness = 1e4;              // N/m, pose clamp
  double damping = 100.0;              // N s/m, pose clamp
  double noise_std = 0.0;              // N, wrench noise
  double ramp = 0.0;                   // s, linear onset/release of wrench, mass and clamp

  bool active(double t) const { return t >= t_start && t < t_end; }

  /// Fraction of the magnitude applied at t: the window indicator, averaged
  /// over the trailing `ramp` seconds when ramp > 0.
  double weight(double t) const;
};

struct DisturbanceProfile {
  std::vector<DisturbanceSegment> segments;

  /// Segments of the same type may not overlap in time.
  void validate() const;
};

struct DisturbanceSample {
  Vector6d wrench = Vector6d::Zero();
  double added_mass = 0.0;
  bool clamped = false;
};

/// Samples disturbances at time t. Pose clamps anchor to the task position
/// at the first tick they are active; noise segments draw from a seeded RNG.
class DisturbanceInjector {
 public:
  explicit DisturbanceInjector(DisturbanceProfile profile, unsigned seed = 0);

  DisturbanceSample sample(double t, const Pose& task_pose, const Vector6d& task_twist);

 private:
  DisturbanceProfile profile_;
  std::map<std::size_t, Vector3d> anchors_;
  std::mt19937 rng_;
};

enum class IntegrationMethod { SemiImplicitEuler, RK4 };

struct IntegratorConfig {
  double dt = 1e-3;
  IntegrationMethod method = IntegrationMethod::SemiImplicitEuler;
  double baumgarte_gain = 0.0;  // 1/s; <= 0 means 1/dt (full velocity projection)
  double drift_tolerance = 1e-6;
  bool position_correction = true;

  void validate() const;
};

/// Ground-truth constrained forward dynamics for a layout.
class SimEngine {
 public:
  /// Inertial parameters come from loaded_models(layout, extra_mass).
  SimEngine(SystemLayout layout, IntegratorConfig config, double extra_mass = 0.0);

  struct Evaluation {
    SystemSnapshot snapshot;
    ProjectionState projection;
    VectorXd qddot;
    VectorXd lambda;           // constraint multipliers
    VectorXd contact_wrenches; // stacked world [f; m] on the robot, including object load
  };

  /// Full evaluation at a state with an applied torque and task-point wrench.
  Evaluation evaluate(const JointState& state, const VectorXd& tau, const VectorXd& Fx) const;

  /// Advances one step with tau and Fx held constant. Returns the new state;
  /// `drift` receives ||Jc qdot|| after stabilization.
  JointState step(const JointState& state, const VectorXd& tau, const VectorXd& Fx,
                  double* drift = nullptr) const;

  /// Pulls q back onto the constraint manifold (Newton on position error).
  VectorXd correct_position(const VectorXd& q) const;

  /// Position-level constraint error; zero on the manifold.
  VectorXd position_error(const VectorXd& q) const;

  /// Rebuilds the loaded models when the added mass changes.
  void set_extra_mass(double extra_mass);
  double extra_mass() const { return extra_mass_; }
  const std::vector<ManipulatorModel>& models() const { return models_; }
  const SystemLayout& layout() const { return layout_; }
  const IntegratorConfig& config() const { return config_; }

 private:
  VectorXd acceleration(const JointState& state, const VectorXd& tau, const VectorXd& Fx) const;

  SystemLayout layout_;
  IntegratorConfig config_;
  double extra_mass_ = 0.0;
  std::vector<ManipulatorModel> models_;
};

/// Arm models carrying half shares of the object (grasp) or a tool payload
/// (surface), as seen by the simulator.
std::vector<ManipulatorModel> loaded_models(const SystemLayout& layout, double extra_mass);

}  // namespace pidyn
