#include "pidyn/report.hpp"

#include <filesystem>
#include <fstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace pidyn {

namespace {

void add_indexed(std::vector<std::string>& cols, const std::string& prefix, int count) {
  for (int i = 0; i < count; ++i) cols.push_back(fmt::format("{}_{}", prefix, i));
}

void add_pose(std::vector<std::string>& cols, const std::string& prefix) {
  for (const char* s : {"px", "py", "pz", "qw", "qx", "qy", "qz"}) {
    cols.push_back(fmt::format("{}_{}", prefix, s));
  }
}

class RowWriter {
 public:
  explicit RowWriter(std::ostream& out) : out_(out) {}

  void value(double v) {
    sep();
    out_ << fmt::format("{:.17g}", v);
  }
  void value(int v) {
    sep();
    out_ << v;
  }
  void vector(const VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) value(v[i]);
  }
  void pose(const Pose& p) {
    for (double v : {p.position.x(), p.position.y(), p.position.z(), p.orientation.w(),
                     p.orientation.x(), p.orientation.y(), p.orientation.z()}) {
      value(v);
    }
  }
  void end() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ostream& out_;
  bool first_ = true;
};

YAML::Node doubles(const std::vector<double>& values) {
  YAML::Node node(YAML::NodeType::Sequence);
  for (double v : values) node.push_back(v);
  node.SetStyle(YAML::EmitterStyle::Flow);
  return node;
}

std::string emit(const YAML::Node& node) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << node;
  return std::string(out.c_str()) + "\n";
}

}  // namespace

std::vector<std::string> trace_columns(const Scenario& sc) {
  const int n = sc.layout.dof();
  const int m = static_cast<int>(sc.config.task_rows.size());
  const int k6 = 6 * static_cast<int>(sc.layout.type == ConstraintType::SurfaceContact
                                          ? 1
                                          : sc.layout.arms.size());
  std::vector<std::string> cols{"t"};
  add_indexed(cols, "q", n);
  add_indexed(cols, "qd", n);
  add_indexed(cols, "tau_motion", n);
  add_indexed(cols, "tau_constraint", n);
  add_indexed(cols, "F", m);
  add_indexed(cols, "Fx_hat", m);
  add_indexed(cols, "Fx_true", 6);
  add_indexed(cols, "F_e", k6);
  add_indexed(cols, "F_c", k6);
  add_indexed(cols, "lambda_true", k6);
  add_indexed(cols, "task_error", m);
  add_pose(cols, "x");
  add_pose(cols, "x_d");
  for (const char* s : {"added_mass", "drift", "accel_residual", "min_normal_force", "cone_margin",
                        "qp_iterations", "qp_active", "qp_objective", "qp_kkt", "qp_failed"}) {
    cols.emplace_back(s);
  }
  return cols;
}

void write_trace_csv(std::ostream& out, const Scenario& sc, const std::vector<TraceRow>& trace) {
  const auto cols = trace_columns(sc);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  RowWriter w(out);
  for (const auto& r : trace) {
    w.value(r.t);
    w.vector(r.q);
    w.vector(r.qdot);
    w.vector(r.tau_motion);
    w.vector(r.tau_constraint);
    w.vector(r.F);
    w.vector(r.Fx_hat);
    w.vector(r.Fx_true);
    w.vector(r.F_e);
    w.vector(r.F_c);
    w.vector(r.lambda_true);
    w.vector(r.task_error);
    w.pose(r.x);
    w.pose(r.x_d);
    w.value(r.added_mass);
    w.value(r.drift);
    w.value(r.accel_residual);
    w.value(r.min_normal_force);
    w.value(r.cone_margin);
    w.value(r.qp_iterations);
    w.value(r.qp_active);
    w.value(r.qp_objective);
    w.value(r.qp_kkt);
    w.value(r.qp_failed ? 1 : 0);
    w.end();
  }
}

std::string summary_yaml(const Scenario& sc, const RunResult& result, const std::string& failure) {
  YAML::Node root;
  root["scenario"] = sc.config.name;
  root["constraint"] = to_string(sc.config.constraint);
  root["dof"] = sc.layout.dof();
  root["ticks"] = result.metrics.ticks;
  root["dt"] = sc.config.integrator.dt;
  root["completed"] = failure.empty();
  if (!failure.empty()) root["failure"] = failure;
  bool passed = failure.empty();
  for (const auto& c : result.checks) {
    YAML::Node node;
    node["applicable"] = c.applicable;
    node["passed"] = c.passed;
    node["value"] = c.value;
    node["threshold"] = c.threshold;
    root["checks"][c.name] = node;
    if (c.applicable && !c.passed) passed = false;
  }
  for (const auto& line : result.qp_failure_log) root["qp_failures"].push_back(line);
  root["passed"] = passed;
  return emit(root);
}

std::string metrics_yaml(const RunMetrics& m, const Scenario& sc) {
  YAML::Node root;
  YAML::Node rows(YAML::NodeType::Sequence);
  for (int r : sc.config.task_rows) rows.push_back(r);
  rows.SetStyle(YAML::EmitterStyle::Flow);
  root["task_rows"] = rows;
  root["tracking_rms"] = doubles(m.tracking_rms);
  root["position_error_rms"] = m.position_error_rms;
  root["max_constraint_drift"] = m.max_drift;
  root["min_normal_force"] = m.min_normal_force;
  root["max_normal_force"] = m.max_normal_force;
  root["min_cone_margin"] = m.min_cone_margin;
  root["cone_violations"] = m.cone_violations;
  root["force_discrepancy"] = m.force_discrepancy;
  root["qp_failures"] = m.qp_failures;
  root["max_qp_iterations"] = m.max_qp_iterations;
  root["max_qp_kkt"] = m.max_qp_kkt;
  root["max_accel_residual"] = m.max_accel_residual;
  root["max_projector_residual"] = m.max_projector_residual;
  root["max_constraint_torque_leak"] = m.max_constraint_torque_leak;
  root["ticks"] = m.ticks;
  root["runtime_s"] = m.runtime_s;
  return emit(root);
}

bool write_run_outputs(const std::string& dir, const Scenario& sc, const RunResult& result,
                       const std::string& failure) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream csv(base / "trace.csv");
    write_trace_csv(csv, sc, result.trace);
    if (!csv) throw Error(fmt::format("cannot write {}", (base / "trace.csv").string()));
  }
  std::ofstream(base / "summary.yaml") << summary_yaml(sc, result, failure);
  std::ofstream(base / "metrics.yaml") << metrics_yaml(result.metrics, sc);
  return failure.empty() && result.passed();
}

}  // namespace pidyn
