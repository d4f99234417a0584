#include "pidyn/config.hpp"

#include <filesystem>

#include <fmt/format.h>

namespace pidyn {

namespace {

VectorXd vecx_from_yaml(const YAML::Node& node, const std::string& field) {
  if (!node || !node.IsSequence()) throw ConfigError(field, "expected a list of numbers");
  VectorXd v(node.size());
  for (std::size_t i = 0; i < node.size(); ++i) v[i] = node[i].as<double>();
  return v;
}

YAML::Node vecx_to_yaml(const VectorXd& v) {
  YAML::Node node(YAML::NodeType::Sequence);
  for (Eigen::Index i = 0; i < v.size(); ++i) node.push_back(v[i]);
  node.SetStyle(YAML::EmitterStyle::Flow);
  return node;
}

YAML::Node require(const YAML::Node& parent, const std::string& key, const std::string& field) {
  const YAML::Node node = parent[key];
  if (!node) throw ConfigError(field, "missing required field");
  return node;
}

template <typename T>
T read_or(const YAML::Node& parent, const std::string& key, const T& fallback) {
  const YAML::Node node = parent[key];
  return node ? node.as<T>() : fallback;
}

ConstraintType constraint_from_string(const std::string& s) {
  if (s == "surface_contact") return ConstraintType::SurfaceContact;
  if (s == "grasp_map") return ConstraintType::GraspMap;
  throw ConfigError("constraint", fmt::format("unknown constraint type '{}'", s));
}

DisturbanceType disturbance_from_string(const std::string& s, const std::string& field) {
  if (s == "constant_wrench") return DisturbanceType::ConstantWrench;
  if (s == "added_mass") return DisturbanceType::AddedMass;
  if (s == "pose_clamp") return DisturbanceType::PoseClamp;
  if (s == "wrench_noise") return DisturbanceType::WrenchNoise;
  throw ConfigError(field, fmt::format("unknown disturbance type '{}'", s));
}

DisturbanceSegment segment_from_yaml(const YAML::Node& n, const std::string& field) {
  DisturbanceSegment seg;
  seg.type = disturbance_from_string(require(n, "type", field + ".type").as<std::string>(),
                                     field + ".type");
  seg.t_start = require(n, "start", field + ".start").as<double>();
  seg.t_end = require(n, "end", field + ".end").as<double>();
  seg.ramp = read_or(n, "ramp", 0.0);
  switch (seg.type) {
    case DisturbanceType::ConstantWrench:
      if (!n["force"] && !n["moment"]) {
        throw ConfigError(field + ".force", "constant wrench needs force and/or moment");
      }
      if (n["force"]) seg.wrench.segment<3>(kLinear) = vec3_from_yaml(n["force"], field + ".force");
      if (n["moment"]) {
        seg.wrench.segment<3>(kAngular) = vec3_from_yaml(n["moment"], field + ".moment");
      }
      break;
    case DisturbanceType::AddedMass:
      seg.mass = require(n, "mass", field + ".mass").as<double>();
      break;
    case DisturbanceType::PoseClamp:
      seg.stiffness = read_or(n, "stiffness", seg.stiffness);
      seg.damping = read_or(n, "damping", seg.damping);
      break;
    case DisturbanceType::WrenchNoise:
      seg.noise_std = require(n, "std", field + ".std").as<double>();
      break;
  }
  return seg;
}

YAML::Node segment_to_yaml(const DisturbanceSegment& seg) {
  YAML::Node n;
  n["type"] = to_string(seg.type);
  n["start"] = seg.t_start;
  n["end"] = seg.t_end;
  if (seg.ramp > 0.0) n["ramp"] = seg.ramp;
  switch (seg.type) {
    case DisturbanceType::ConstantWrench:
      n["force"] = vec3_to_yaml(seg.wrench.segment<3>(kLinear));
      n["moment"] = vec3_to_yaml(seg.wrench.segment<3>(kAngular));
      break;
    case DisturbanceType::AddedMass:
      n["mass"] = seg.mass;
      break;
    case DisturbanceType::PoseClamp:
      n["stiffness"] = seg.stiffness;
      n["damping"] = seg.damping;
      break;
    case DisturbanceType::WrenchNoise:
      n["std"] = seg.noise_std;
      break;
  }
  return n;
}

}  // namespace

const char* to_string(ConstraintType type) {
  return type == ConstraintType::SurfaceContact ? "surface_contact" : "grasp_map";
}

const char* to_string(DisturbanceType type) {
  switch (type) {
    case DisturbanceType::ConstantWrench: return "constant_wrench";
    case DisturbanceType::AddedMass: return "added_mass";
    case DisturbanceType::PoseClamp: return "pose_clamp";
    case DisturbanceType::WrenchNoise: return "wrench_noise";
  }
  return "unknown";
}

void ScenarioConfig::validate() const {
  if (arms.empty()) throw ConfigError("arms", "at least one arm is required");
  for (std::size_t i = 0; i < arms.size(); ++i) {
    arms[i].model.validate();
    if (arms[i].q_seed.size() != arms[i].model.dof()) {
      throw ConfigError(fmt::format("arms[{}].q_seed", i),
                        fmt::format("expected {} entries", arms[i].model.dof()));
    }
  }
  if (task_rows.empty()) throw ConfigError("task_rows", "at least one task row is required");
  for (int r : task_rows) {
    if (r < 0 || r > 5) throw ConfigError("task_rows", "rows must lie in 0..5");
  }
  if (trajectory.type == TrajectoryType::Circle) {
    if (!(trajectory.radius > 0.0)) throw ConfigError("trajectory.radius", "must be positive");
    if (trajectory.plane != "xy" && trajectory.plane != "yz") {
      throw ConfigError("trajectory.plane", "must be 'xy' or 'yz'");
    }
  }
  const auto m = static_cast<Eigen::Index>(task_rows.size());
  if (gains.stiffness.size() != m) {
    throw ConfigError("gains.stiffness", fmt::format("expected {} entries", m));
  }
  if (gains.damping.size() != 0 && gains.damping.size() != m) {
    throw ConfigError("gains.damping", fmt::format("expected {} entries", m));
  }
  if ((gains.stiffness.array() <= 0.0).any()) {
    throw ConfigError("gains.stiffness", "entries must be positive");
  }
  if (gains.damping.size() != 0 && (gains.damping.array() <= 0.0).any()) {
    throw ConfigError("gains.damping", "entries must be positive");
  }
  if (!(gains.damping_ratio > 0.0)) throw ConfigError("gains.damping_ratio", "must be positive");
  if (gains.posture_stiffness < 0.0 || gains.posture_damping < 0.0) {
    throw ConfigError("gains.posture", "gains must be non-negative");
  }
  if (!friction) throw ConfigError("friction", "friction parameters are required");
  friction->validate();
  if (cone_edges < 3) throw ConfigError("friction.edges", "at least 3 edges are required");
  if (cone_margin < 0.0 || cone_margin >= 1.0) {
    throw ConfigError("friction.margin", "must lie in [0, 1)");
  }

  if (constraint == ConstraintType::SurfaceContact) {
    if (arms.size() != 1) throw ConfigError("arms", "surface contact uses exactly one arm");
    if (!surface) throw ConfigError("surface", "required for surface_contact scenarios");
    if (object) throw ConfigError("object", "not allowed for surface_contact scenarios");
  } else {
    if (arms.size() < 2) throw ConfigError("arms", "grasp_map scenarios need at least two arms");
    if (!object) throw ConfigError("object", "required for grasp_map scenarios");
    if (surface) throw ConfigError("surface", "not allowed for grasp_map scenarios");
    if (object->grasp_offsets.size() != arms.size()) {
      throw ConfigError("object.grasp_offsets", "one offset per arm is required");
    }
    if (!(object->mass > 0.0)) throw ConfigError("object.mass", "must be positive");
    if ((object->dims.array() <= 0.0).any()) throw ConfigError("object.dims", "must be positive");
    for (std::size_t i = 0; i < object->grasp_offsets.size(); ++i) {
      if (object->grasp_offsets[i].norm() < 1e-9) {
        throw ConfigError(fmt::format("object.grasp_offsets[{}]", i),
                          "contact must be away from the centre of mass");
      }
    }
  }
  disturbances.validate();
  integrator.validate();
  if (!(duration > 0.0)) throw ConfigError("duration", "must be positive");
  if (!(agreement_tolerance > 0.0)) {
    throw ConfigError("checks.agreement_tolerance", "must be positive");
  }
}

ScenarioConfig config_from_yaml(const YAML::Node& root, const std::string& base_dir) {
  ScenarioConfig c;
  c.name = read_or<std::string>(root, "name", "scenario");
  c.constraint = constraint_from_string(require(root, "constraint", "constraint").as<std::string>());
  c.duration = read_or(root, "duration", c.duration);
  c.seed = read_or(root, "seed", c.seed);

  const YAML::Node arms = require(root, "arms", "arms");
  if (!arms.IsSequence()) throw ConfigError("arms", "expected a list");
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const std::string field = fmt::format("arms[{}]", i);
    ArmConfig arm;
    arm.model_path = require(arms[i], "model", field + ".model").as<std::string>();
    std::filesystem::path path(arm.model_path);
    if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
    arm.model = load_model(path.string());
    if (arms[i]["base"]) {
      arm.base = pose_from_yaml(arms[i]["base"], field + ".base");
      arm.model.base = *arm.base;
    }
    if (arms[i]["name"]) arm.model.name = arms[i]["name"].as<std::string>();
    arm.q_seed = arms[i]["q_seed"] ? vecx_from_yaml(arms[i]["q_seed"], field + ".q_seed")
                                   : VectorXd::Zero(arm.model.dof());
    c.arms.push_back(std::move(arm));
  }

  if (root["task_rows"]) {
    c.task_rows.clear();
    for (const auto& r : root["task_rows"]) c.task_rows.push_back(r.as<int>());
  }

  const YAML::Node traj = require(root, "trajectory", "trajectory");
  const std::string ttype = require(traj, "type", "trajectory.type").as<std::string>();
  if (ttype == "circle") {
    c.trajectory.type = TrajectoryType::Circle;
    c.trajectory.radius = require(traj, "radius", "trajectory.radius").as<double>();
    c.trajectory.speed = require(traj, "speed", "trajectory.speed").as<double>();
    c.trajectory.plane = read_or<std::string>(traj, "plane", "xy");
  } else if (ttype == "hold") {
    c.trajectory.type = TrajectoryType::Hold;
  } else {
    throw ConfigError("trajectory.type", fmt::format("unknown trajectory '{}'", ttype));
  }
  const Pose center = pose_from_yaml(require(traj, "center", "trajectory.center"),
                                     "trajectory.center");
  c.trajectory.center = center.position;
  c.trajectory.orientation = center.orientation;

  const YAML::Node gains = require(root, "gains", "gains");
  c.gains.stiffness = vecx_from_yaml(require(gains, "stiffness", "gains.stiffness"),
                                     "gains.stiffness");
  if (gains["damping"]) c.gains.damping = vecx_from_yaml(gains["damping"], "gains.damping");
  c.gains.damping_ratio = read_or(gains, "damping_ratio", c.gains.damping_ratio);
  c.gains.posture_stiffness = read_or(gains, "posture_stiffness", c.gains.posture_stiffness);
  c.gains.posture_damping = read_or(gains, "posture_damping", c.gains.posture_damping);

  if (const YAML::Node f = root["friction"]) {
    FrictionParams p;
    p.mu = require(f, "mu", "friction.mu").as<double>();
    p.gamma = require(f, "gamma", "friction.gamma").as<double>();
    p.delta_x = require(f, "delta_x", "friction.delta_x").as<double>();
    p.delta_y = require(f, "delta_y", "friction.delta_y").as<double>();
    c.friction = p;
    c.cone_edges = read_or(f, "edges", c.cone_edges);
    c.qp_eps_scale = read_or(f, "eps_scale", c.qp_eps_scale);
    c.cone_margin = read_or(f, "margin", c.cone_margin);
  }

  if (const YAML::Node s = root["surface"]) {
    SurfaceConfig sc;
    sc.height = require(s, "height", "surface.height").as<double>();
    if (s["rpy"]) sc.rpy = vec3_from_yaml(s["rpy"], "surface.rpy");
    c.surface = sc;
  }

  if (const YAML::Node o = root["object"]) {
    ObjectConfig oc;
    if (o["dims"]) oc.dims = vec3_from_yaml(o["dims"], "object.dims");
    oc.mass = read_or(o, "mass", oc.mass);
    const YAML::Node offsets = require(o, "grasp_offsets", "object.grasp_offsets");
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      oc.grasp_offsets.push_back(
          vec3_from_yaml(offsets[i], fmt::format("object.grasp_offsets[{}]", i)));
    }
    c.object = oc;
  }

  if (const YAML::Node d = root["disturbances"]) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      c.disturbances.segments.push_back(
          segment_from_yaml(d[i], fmt::format("disturbances[{}]", i)));
    }
  }

  c.integrator.position_correction = c.constraint == ConstraintType::SurfaceContact;
  if (const YAML::Node in = root["integrator"]) {
    c.integrator.dt = read_or(in, "dt", c.integrator.dt);
    const std::string method = read_or<std::string>(in, "method", "semi_implicit_euler");
    if (method == "semi_implicit_euler") {
      c.integrator.method = IntegrationMethod::SemiImplicitEuler;
    } else if (method == "rk4") {
      c.integrator.method = IntegrationMethod::RK4;
    } else {
      throw ConfigError("integrator.method", fmt::format("unknown method '{}'", method));
    }
    c.integrator.baumgarte_gain = read_or(in, "baumgarte_gain", c.integrator.baumgarte_gain);
    c.integrator.drift_tolerance = read_or(in, "drift_tolerance", c.integrator.drift_tolerance);
    c.integrator.position_correction =
        read_or(in, "position_correction", c.integrator.position_correction);
  }

  const std::string estimator = read_or<std::string>(root, "estimator", "quasi_static");
  if (estimator == "quasi_static") {
    c.estimator = EstimatorMode::QuasiStatic;
  } else if (estimator == "with_acceleration") {
    c.estimator = EstimatorMode::WithAcceleration;
  } else {
    throw ConfigError("estimator", fmt::format("unknown estimator '{}'", estimator));
  }

  if (const YAML::Node checks = root["checks"]) {
    c.check_model_agreement = read_or(checks, "model_agreement", c.check_model_agreement);
    c.agreement_tolerance = read_or(checks, "agreement_tolerance", c.agreement_tolerance);
  }

  c.validate();
  return c;
}

YAML::Node config_to_yaml(const ScenarioConfig& c) {
  YAML::Node root;
  root["name"] = c.name;
  root["constraint"] = to_string(c.constraint);
  root["duration"] = c.duration;
  root["seed"] = c.seed;
  for (const auto& arm : c.arms) {
    YAML::Node a;
    a["name"] = arm.model.name;
    a["model"] = arm.model_path;
    if (arm.base) a["base"] = pose_to_yaml(*arm.base);
    a["q_seed"] = vecx_to_yaml(arm.q_seed);
    root["arms"].push_back(a);
  }
  YAML::Node rows(YAML::NodeType::Sequence);
  for (int r : c.task_rows) rows.push_back(r);
  rows.SetStyle(YAML::EmitterStyle::Flow);
  root["task_rows"] = rows;

  YAML::Node traj;
  traj["type"] = c.trajectory.type == TrajectoryType::Circle ? "circle" : "hold";
  if (c.trajectory.type == TrajectoryType::Circle) {
    traj["radius"] = c.trajectory.radius;
    traj["speed"] = c.trajectory.speed;
    traj["plane"] = c.trajectory.plane;
  }
  traj["center"] = pose_to_yaml(Pose{c.trajectory.center, c.trajectory.orientation});
  root["trajectory"] = traj;

  YAML::Node gains;
  gains["stiffness"] = vecx_to_yaml(c.gains.stiffness);
  if (c.gains.damping.size() > 0) gains["damping"] = vecx_to_yaml(c.gains.damping);
  gains["damping_ratio"] = c.gains.damping_ratio;
  gains["posture_stiffness"] = c.gains.posture_stiffness;
  gains["posture_damping"] = c.gains.posture_damping;
  root["gains"] = gains;

  if (c.friction) {
    YAML::Node f;
    f["mu"] = c.friction->mu;
    f["gamma"] = c.friction->gamma;
    f["delta_x"] = c.friction->delta_x;
    f["delta_y"] = c.friction->delta_y;
    f["edges"] = c.cone_edges;
    f["eps_scale"] = c.qp_eps_scale;
    f["margin"] = c.cone_margin;
    root["friction"] = f;
  }
  if (c.surface) {
    YAML::Node s;
    s["height"] = c.surface->height;
    s["rpy"] = vec3_to_yaml(c.surface->rpy);
    root["surface"] = s;
  }
  if (c.object) {
    YAML::Node o;
    o["dims"] = vec3_to_yaml(c.object->dims);
    o["mass"] = c.object->mass;
    for (const auto& g : c.object->grasp_offsets) o["grasp_offsets"].push_back(vec3_to_yaml(g));
    root["object"] = o;
  }
  if (!c.disturbances.segments.empty()) {
    for (const auto& seg : c.disturbances.segments) {
      root["disturbances"].push_back(segment_to_yaml(seg));
    }
  }
  YAML::Node in;
  in["dt"] = c.integrator.dt;
  in["method"] =
      c.integrator.method == IntegrationMethod::RK4 ? "rk4" : "semi_implicit_euler";
  in["baumgarte_gain"] = c.integrator.baumgarte_gain;
  in["drift_tolerance"] = c.integrator.drift_tolerance;
  in["position_correction"] = c.integrator.position_correction;
  root["integrator"] = in;
  root["estimator"] =
      c.estimator == EstimatorMode::QuasiStatic ? "quasi_static" : "with_acceleration";
  YAML::Node checks;
  checks["model_agreement"] = c.check_model_agreement;
  checks["agreement_tolerance"] = c.agreement_tolerance;
  root["checks"] = checks;
  return root;
}

ScenarioConfig load_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ConfigError(path, e.what());
  }
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return config_from_yaml(root, dir.empty() ? "." : dir);
}

std::string dump_config(const ScenarioConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << config_to_yaml(c);
  return out.c_str();
}

}  // namespace pidyn
