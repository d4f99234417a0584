#pragma once

#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "pidyn/impedance.hpp"
#include "pidyn/model.hpp"
#include "pidyn/sim.hpp"
#include "pidyn/wrench_qp.hpp"

namespace pidyn {

struct ArmConfig {
  std::string model_path;  // as written in the config
  ManipulatorModel model;
  std::optional<Pose> base;                 // overrides the model's base pose
  VectorXd q_seed;                          // initial guess for the start-pose solve
};

enum class TrajectoryType { Circle, Hold };

/// Circle: center + r (cos st, sin st) in `plane` ("xy" or "yz"); hold: center.
/// Orientation is fixed for both.
struct TrajectoryConfig {
  TrajectoryType type = TrajectoryType::Circle;
  double radius = 0.1;
  double speed = 1.5707963267948966;
  std::string plane = "xy";
  Vector3d center = Vector3d::Zero();
  Quaterniond orientation = Quaterniond::Identity();
};

struct GainsConfig {
  VectorXd stiffness;     // task-dim diagonal
  VectorXd damping;       // empty: critically damped from Lambda_c at start
  double damping_ratio = 1.0;
  double posture_stiffness = 5.0;
  double posture_damping = 2.0;
};

struct SurfaceConfig {
  double height = 0.0;
  Vector3d rpy = Vector3d::Zero();  // surface axes (t1, t2, n) relative to world
};

struct ObjectConfig {
  Vector3d dims{0.20, 0.30, 0.40};
  double mass = 0.700;
  std::vector<Vector3d> grasp_offsets;  // hand contact points in the object frame
};

struct ScenarioConfig {
  std::string name;
  ConstraintType constraint = ConstraintType::SurfaceContact;
  std::vector<ArmConfig> arms;
  TaskRows task_rows = full_task_rows();
  TrajectoryConfig trajectory;
  GainsConfig gains;
  std::optional<FrictionParams> friction;
  int cone_edges = 8;
  double qp_eps_scale = 1e-8;
  double cone_margin = 0.0;            // controller-side tightening of the cone
  std::optional<SurfaceConfig> surface;
  std::optional<ObjectConfig> object;
  DisturbanceProfile disturbances;
  IntegratorConfig integrator;
  EstimatorMode estimator = EstimatorMode::QuasiStatic;
  double duration = 10.0;
  unsigned seed = 0;
  bool check_model_agreement = true;   // controller and simulator share inertials
  double agreement_tolerance = 0.01;   // relative RMS

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// `base_dir` resolves relative model paths.
ScenarioConfig config_from_yaml(const YAML::Node& node, const std::string& base_dir);
YAML::Node config_to_yaml(const ScenarioConfig& config);
ScenarioConfig load_config(const std::string& path);
std::string dump_config(const ScenarioConfig& config);

const char* to_string(ConstraintType type);
const char* to_string(DisturbanceType type);

}  // namespace pidyn
