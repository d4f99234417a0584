#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pidyn {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Quaterniond;
using Eigen::Vector3d;
using Eigen::VectorXd;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

// Twists and Jacobians coming out of the dynamics module are ordered
// [angular(3); linear(3)]. Wrenches paired with them are [moment; force].
// Contact wrenches in the grasp / wrench_qp modules are [force; moment].
inline constexpr int kAngular = 0;
inline constexpr int kLinear = 3;

struct Pose {
  Vector3d position = Vector3d::Zero();
  Quaterniond orientation = Quaterniond::Identity();

  Matrix3d rotation() const { return orientation.toRotationMatrix(); }
};

/// a * b: b expressed in a's frame, mapped to a's parent.
inline Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.position = a.position + a.orientation * b.position;
  out.orientation = (a.orientation * b.orientation).normalized();
  return out;
}

inline Pose inverse(const Pose& a) {
  Pose out;
  out.orientation = a.orientation.conjugate();
  out.position = -(out.orientation * a.position);
  return out;
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, int rank, int required)
      : Error(what), rank_(rank), required_(required) {}
  int rank() const { return rank_; }
  int required() const { return required_; }

 private:
  int rank_;
  int required_;
};

class TaskSingularityError : public Error {
 public:
  using Error::Error;
};

class SingularInertiaError : public Error {
 public:
  using Error::Error;
};

class InfeasibleQPError : public Error {
 public:
  using Error::Error;
};

class MaxIterationError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& msg)
      : Error(field + ": " + msg), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace pidyn
