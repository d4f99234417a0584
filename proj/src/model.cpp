#include "pidyn/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace pidyn {

namespace {

Matrix3d inertia_from_yaml(const YAML::Node& node, const std::string& field) {
  if (!node || !node.IsSequence() || node.size() != 6) {
    throw ConfigError(field, "expected [ixx, iyy, izz, ixy, ixz, iyz]");
  }
  const double ixx = node[0].as<double>(), iyy = node[1].as<double>(),
               izz = node[2].as<double>(), ixy = node[3].as<double>(),
               ixz = node[4].as<double>(), iyz = node[5].as<double>();
  Matrix3d inertia;
  inertia << ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz;
  return inertia;
}

YAML::Node inertia_to_yaml(const Matrix3d& i) {
  YAML::Node node;
  for (double v : {i(0, 0), i(1, 1), i(2, 2), i(0, 1), i(0, 2), i(1, 2)}) {
    node.push_back(v);
  }
  node.SetStyle(YAML::EmitterStyle::Flow);
  return node;
}

}  // namespace

Matrix3d rpy_to_rotation(const Vector3d& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vector3d::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vector3d::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vector3d::UnitX()))
      .toRotationMatrix();
}

Vector3d rotation_to_rpy(const Matrix3d& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

Vector3d vec3_from_yaml(const YAML::Node& node, const std::string& field) {
  if (!node || !node.IsSequence() || node.size() != 3) {
    throw ConfigError(field, "expected a 3-vector");
  }
  return {node[0].as<double>(), node[1].as<double>(), node[2].as<double>()};
}

YAML::Node vec3_to_yaml(const Vector3d& v) {
  YAML::Node node;
  node.push_back(v.x());
  node.push_back(v.y());
  node.push_back(v.z());
  node.SetStyle(YAML::EmitterStyle::Flow);
  return node;
}

// Accepts {xyz, rpy} or {xyz, quat: [w, x, y, z]}. Serialization always
// writes the quaternion so that parse/serialize/parse is exact.
Pose pose_from_yaml(const YAML::Node& node, const std::string& field) {
  Pose pose;
  if (!node) return pose;
  if (node["xyz"]) pose.position = vec3_from_yaml(node["xyz"], field + ".xyz");
  if (node["quat"]) {
    const YAML::Node q = node["quat"];
    if (!q.IsSequence() || q.size() != 4) {
      throw ConfigError(field + ".quat", "expected [w, x, y, z]");
    }
    pose.orientation = Quaterniond(q[0].as<double>(), q[1].as<double>(),
                                   q[2].as<double>(), q[3].as<double>());
    const double norm = pose.orientation.norm();
    if (std::abs(norm - 1.0) > 1e-9) {
      throw ConfigError(field + ".quat", "quaternion is not unit norm");
    }
    if (std::abs(norm - 1.0) > 1e-12) pose.orientation.normalize();
  } else if (node["rpy"]) {
    pose.orientation =
        Quaterniond(rpy_to_rotation(vec3_from_yaml(node["rpy"], field + ".rpy")));
  }
  return pose;
}

YAML::Node pose_to_yaml(const Pose& pose) {
  YAML::Node node;
  node["xyz"] = vec3_to_yaml(pose.position);
  YAML::Node q;
  const Quaterniond& o = pose.orientation;
  for (double v : {o.w(), o.x(), o.y(), o.z()}) q.push_back(v);
  q.SetStyle(YAML::EmitterStyle::Flow);
  node["quat"] = q;
  return node;
}

void ManipulatorModel::validate() const {
  if (links.empty()) throw ConfigError(name + ".links", "model has no links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    const std::string field = fmt::format("{}.links[{}]", name, i);
    if (std::abs(l.axis.norm() - 1.0) > 1e-12) {
      throw ConfigError(field + ".axis", "joint axis must have unit norm");
    }
    if (!(l.mass > 0.0)) throw ConfigError(field + ".mass", "mass must be positive");
    if ((l.inertia - l.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw ConfigError(field + ".inertia", "inertia must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix3d> eig(l.inertia);
    if (eig.eigenvalues().minCoeff() <= 0.0) {
      throw ConfigError(field + ".inertia", "inertia must be positive definite");
    }
  }
}

ManipulatorModel ManipulatorModel::with_payload(double payload_mass,
                                                const Vector3d& payload_com,
                                                const Matrix3d& payload_inertia) const {
  ManipulatorModel out = *this;
  if (payload_mass <= 0.0) return out;
  Link& tip = out.links.back();
  const double total = tip.mass + payload_mass;
  const Vector3d com = (tip.mass * tip.com + payload_mass * payload_com) / total;
  auto shifted = [&](const Matrix3d& inertia, double m, const Vector3d& c) {
    const Vector3d d = c - com;
    return Matrix3d(inertia + m * (d.squaredNorm() * Matrix3d::Identity() - d * d.transpose()));
  };
  tip.inertia = shifted(tip.inertia, tip.mass, tip.com) +
                shifted(payload_inertia, payload_mass, payload_com);
  tip.mass = total;
  tip.com = com;
  return out;
}

ManipulatorModel model_from_yaml(const YAML::Node& node) {
  ManipulatorModel model;
  model.name = node["name"] ? node["name"].as<std::string>() : "robot";
  if (node["gravity"]) model.gravity = vec3_from_yaml(node["gravity"], model.name + ".gravity");
  model.base = pose_from_yaml(node["base"], model.name + ".base");
  model.tool = pose_from_yaml(node["tool"], model.name + ".tool");
  const YAML::Node links = node["links"];
  if (!links || !links.IsSequence()) {
    throw ConfigError(model.name + ".links", "missing link list");
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    const YAML::Node ln = links[i];
    const std::string field = fmt::format("{}.links[{}]", model.name, i);
    Link link;
    link.name = ln["name"] ? ln["name"].as<std::string>() : fmt::format("link{}", i + 1);
    link.origin = pose_from_yaml(ln["origin"], field + ".origin");
    link.axis = vec3_from_yaml(ln["axis"], field + ".axis");
    if (!ln["mass"]) throw ConfigError(field + ".mass", "missing");
    link.mass = ln["mass"].as<double>();
    link.com = vec3_from_yaml(ln["com"], field + ".com");
    link.inertia = inertia_from_yaml(ln["inertia"], field + ".inertia");
    model.links.push_back(link);
  }
  model.validate();
  return model;
}

YAML::Node model_to_yaml(const ManipulatorModel& model) {
  YAML::Node node;
  node["name"] = model.name;
  node["gravity"] = vec3_to_yaml(model.gravity);
  node["base"] = pose_to_yaml(model.base);
  node["tool"] = pose_to_yaml(model.tool);
  for (const Link& l : model.links) {
    YAML::Node ln;
    ln["name"] = l.name;
    ln["origin"] = pose_to_yaml(l.origin);
    ln["axis"] = vec3_to_yaml(l.axis);
    ln["mass"] = l.mass;
    ln["com"] = vec3_to_yaml(l.com);
    ln["inertia"] = inertia_to_yaml(l.inertia);
    node["links"].push_back(ln);
  }
  return node;
}

ManipulatorModel load_model(const std::string& path) {
  YAML::Node node;
  try {
    node = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ConfigError(path, e.what());
  }
  return model_from_yaml(node);
}

}  // namespace pidyn
