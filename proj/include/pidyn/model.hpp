#pragma once

#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "pidyn/types.hpp"

namespace pidyn {

/// One revolute link of a serial chain.
///
/// The joint frame sits at `origin` expressed in the parent link frame; the
/// link frame is the joint frame rotated by q about `axis`. Mass properties
/// are expressed in the link frame, inertia about the centre of mass.
struct Link {
  std::string name;
  Pose origin;
  Vector3d axis = Vector3d::UnitZ();
  double mass = 0.0;
  Vector3d com = Vector3d::Zero();
  Matrix3d inertia = Matrix3d::Zero();
};

/// Kinematic and inertial description of one serial manipulator.
struct ManipulatorModel {
  std::string name;
  Pose base;                 // world pose of the chain root
  std::vector<Link> links;   // ordered root to tip
  Pose tool;                 // operational point in the last link frame
  Vector3d gravity{0.0, 0.0, -9.81};

  int dof() const { return static_cast<int>(links.size()); }

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  /// Rigidly merges a payload into the last link. `com` and `inertia` are
  /// expressed in the last link frame; inertia is about the payload COM.
  ManipulatorModel with_payload(double mass, const Vector3d& com,
                                const Matrix3d& inertia) const;
};

ManipulatorModel model_from_yaml(const YAML::Node& node);
YAML::Node model_to_yaml(const ManipulatorModel& model);
ManipulatorModel load_model(const std::string& path);

// YAML helpers shared with the scenario config.
Vector3d vec3_from_yaml(const YAML::Node& node, const std::string& field);
YAML::Node vec3_to_yaml(const Vector3d& v);
Pose pose_from_yaml(const YAML::Node& node, const std::string& field);
YAML::Node pose_to_yaml(const Pose& pose);
Matrix3d rpy_to_rotation(const Vector3d& rpy);
Vector3d rotation_to_rpy(const Matrix3d& rotation);

}  // namespace pidyn
