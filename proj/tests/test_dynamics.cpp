#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "pidyn/dynamics.hpp"
#include "test_support.hpp"

namespace pidyn {
namespace {

using test::planar_two_link;
using test::random_model;
using test::random_vector;
using test::uniform;

constexpr double kPi = std::numbers::pi;

ManipulatorModel pendulum(double m, double l, double g) {
  ManipulatorModel model;
  model.name = "pendulum";
  model.gravity = Vector3d(0.0, -g, 0.0);
  Link link;
  link.mass = m;
  link.com = Vector3d(0.0, -l, 0.0);
  model.links = {link};
  model.tool.position = link.com;
  return model;
}

Pose chain_oracle(const ManipulatorModel& model, const VectorXd& q) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translate(model.base.position);
  t.rotate(model.base.orientation);
  for (int i = 0; i < model.dof(); ++i) {
    const Link& l = model.links[i];
    t.translate(l.origin.position);
    t.rotate(l.origin.orientation);
    t.rotate(Eigen::AngleAxisd(q[i], l.axis));
  }
  t.translate(model.tool.position);
  t.rotate(model.tool.orientation);
  return Pose{t.translation(), Quaterniond(t.rotation())};
}

// Angular velocity from a central difference of rotations.
Vector3d rotation_rate(const Matrix3d& plus, const Matrix3d& minus, double two_dt) {
  const Eigen::AngleAxisd aa(plus * minus.transpose());
  return aa.axis() * aa.angle() / two_dt;
}

TEST(ForwardKinematics, PlanarStraightAndQuarterTurn) {
  const auto arm = planar_two_link(1, 1, 1, 1, 1, 1, 0, 0);
  EXPECT_TRUE(forward_kinematics(arm, Eigen::Vector2d(0, 0)).ee.position.isApprox(
      Vector3d(2, 0, 0), 1e-12));
  EXPECT_LT((forward_kinematics(arm, Eigen::Vector2d(kPi / 2, 0)).ee.position - Vector3d(0, 2, 0))
                .norm(),
            1e-12);
}

TEST(ForwardKinematics, MatchesHomogeneousTransformChain) {
  std::mt19937 rng(1);
  const ManipulatorModel arm = test::lwr();
  for (int trial = 0; trial < 50; ++trial) {
    const VectorXd q = random_vector(rng, arm.dof(), kPi);
    const Pose fk = forward_kinematics(arm, q).ee;
    const Pose oracle = chain_oracle(arm, q);
    EXPECT_LT((fk.position - oracle.position).norm(), 1e-12);
    EXPECT_LT(fk.orientation.angularDistance(oracle.orientation), 1e-12);
    EXPECT_NEAR(fk.orientation.norm(), 1.0, 1e-12);
  }
}

TEST(ForwardKinematics, RejectsWrongLength) {
  EXPECT_THROW(forward_kinematics(test::lwr(), VectorXd::Zero(3)), DimensionError);
}

TEST(Jacobian, PlanarStraightConfiguration) {
  const auto arm = planar_two_link(1, 1, 1, 1, 1, 1, 0, 0);
  const MatrixXd j = jacobian(arm, Eigen::Vector2d(0, 0));
  // Rows 3..5 are linear.
  EXPECT_NEAR(j(3, 0), 0.0, 1e-12);
  EXPECT_NEAR(j(4, 0), 2.0, 1e-12);
  EXPECT_NEAR(j(3, 1), 0.0, 1e-12);
  EXPECT_NEAR(j(4, 1), 1.0, 1e-12);
  // Angular rows: both joints spin about world z.
  EXPECT_NEAR(j(2, 0), 1.0, 1e-12);
  EXPECT_NEAR(j(2, 1), 1.0, 1e-12);
  // Fully extended: the in-plane linear block has rank 1.
  const MatrixXd planar = j.block(3, 0, 2, 2);
  EXPECT_EQ(Eigen::FullPivLU<MatrixXd>(planar).setThreshold(1e-10).rank(), 1);
}

TEST(Jacobian, MatchesFiniteDifferences) {
  std::mt19937 rng(2);
  const double step = 1e-7;
  for (int trial = 0; trial < 100; ++trial) {
    const ManipulatorModel arm = trial % 2 ? test::lwr() : random_model(rng, 7);
    const VectorXd q = random_vector(rng, 7, kPi);
    const MatrixXd j = jacobian(arm, q);
    for (int c = 0; c < 7; ++c) {
      VectorXd qp = q, qm = q;
      qp[c] += step;
      qm[c] -= step;
      const Pose a = forward_kinematics(arm, qp).ee, b = forward_kinematics(arm, qm).ee;
      const Vector3d v = (a.position - b.position) / (2 * step);
      const Vector3d w = rotation_rate(a.rotation(), b.rotation(), 2 * step);
      EXPECT_LT((j.block<3, 1>(kLinear, c) - v).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_LT((j.block<3, 1>(kAngular, c) - w).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(JacobianDot, ZeroAtRest) {
  std::mt19937 rng(3);
  const ManipulatorModel arm = test::lwr();
  EXPECT_LT(jacobian_dot(arm, random_vector(rng, 7, 2.0), VectorXd::Zero(7)).norm(), 1e-15);
}

TEST(JacobianDot, MatchesFiniteDifferences) {
  std::mt19937 rng(4);
  const double delta = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const ManipulatorModel arm = trial % 2 ? test::lwr() : random_model(rng, 7);
    const VectorXd q = random_vector(rng, 7, kPi);
    const VectorXd qdot = random_vector(rng, 7, 1.5);
    const MatrixXd fd =
        (jacobian(arm, q + delta * qdot) - jacobian(arm, q - delta * qdot)) / (2 * delta);
    EXPECT_LT((jacobian_dot(arm, q, qdot) - fd).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(JacobianDot, PlanarClosedForm) {
  const double l1 = 0.7, l2 = 0.4;
  const auto arm = planar_two_link(1, 1, l1, l2, 0.3, 0.2, 0.1, 0.1);
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd q = random_vector(rng, 2, kPi), qd = random_vector(rng, 2, 2.0);
    const double c1 = std::cos(q[0]), s1 = std::sin(q[0]);
    const double c12 = std::cos(q[0] + q[1]), s12 = std::sin(q[0] + q[1]);
    const double w1 = qd[0], w12 = qd[0] + qd[1];
    Eigen::Matrix2d expected;
    expected << -l1 * c1 * w1 - l2 * c12 * w12, -l2 * c12 * w12,
        -l1 * s1 * w1 - l2 * s12 * w12, -l2 * s12 * w12;
    const MatrixXd jd = jacobian_dot(arm, q, qd);
    EXPECT_LT((jd.block(kLinear, 0, 2, 2) - expected).norm(), 1e-12);
    EXPECT_LT(jd.topRows(3).norm(), 1e-12);  // planar: angular rate Jacobian is constant
  }
}

TEST(MassMatrix, TwoLinkPointMasses) {
  const auto arm = planar_two_link(1, 1, 1, 1, 1, 1, 0, 0);
  const MatrixXd m = mass_matrix(arm, Eigen::Vector2d(0.3, 0.0));
  EXPECT_NEAR(m(0, 0), 5.0, 1e-12);
  EXPECT_NEAR(m(0, 1), 2.0, 1e-12);
  EXPECT_NEAR(m(1, 1), 1.0, 1e-12);
}

TEST(MassMatrix, PointMassPendulum) {
  const double m = 1.3, l = 0.8;
  const MatrixXd mm = mass_matrix(pendulum(m, l, 9.81), VectorXd::Constant(1, 0.4));
  EXPECT_NEAR(mm(0, 0), m * l * l, 1e-12);
}

TEST(MassMatrix, KineticEnergyMatchesPerLinkTwists) {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const ManipulatorModel arm = trial % 2 ? test::lwr() : random_model(rng, 7);
    const VectorXd q = random_vector(rng, 7, kPi), qd = random_vector(rng, 7, 2.0);
    const Kinematics kin = forward_kinematics(arm, q);
    double energy = 0.0;
    for (int i = 0; i < arm.dof(); ++i) {
      const Link& l = arm.links[i];
      const Matrix3d& r = kin.link_rotation[i];
      const Vector3d com = kin.link_position[i] + r * l.com;
      const VectorXd twist = point_jacobian(kin, i, com) * qd;
      const Vector3d w = twist.segment<3>(kAngular), v = twist.segment<3>(kLinear);
      energy += 0.5 * l.mass * v.squaredNorm() + 0.5 * w.dot(r * l.inertia * r.transpose() * w);
    }
    const MatrixXd m = mass_matrix(arm, q);
    EXPECT_NEAR(qd.dot(m * qd), 2.0 * energy, 1e-9 * 2.0 * energy);
    EXPECT_NEAR(kinetic_energy(arm, {q, qd, 0.0}), energy, 1e-9 * energy);
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-10 * m.cwiseAbs().maxCoeff());
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatrixXd>(m).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(BiasForces, ZeroAtRestWithoutGravity) {
  std::mt19937 rng(7);
  ManipulatorModel arm = test::lwr();
  arm.gravity.setZero();
  EXPECT_LT(bias_forces(arm, random_vector(rng, 7, 2.0), VectorXd::Zero(7)).norm(), 1e-14);
}

TEST(BiasForces, PendulumGravityTorque) {
  const double m = 0.9, l = 0.6, g = 9.81;
  for (double q : {-2.0, -0.5, 0.0, 0.3, 1.2, 3.0}) {
    const VectorXd h = bias_forces(pendulum(m, l, g), VectorXd::Constant(1, q), VectorXd::Zero(1));
    EXPECT_NEAR(h[0], m * g * l * std::sin(q), 1e-12);
  }
}

TEST(Dynamics, TwoLinkLagrangianClosedForm) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const double m1 = uniform(rng, 0.5, 3), m2 = uniform(rng, 0.5, 3);
    const double l1 = uniform(rng, 0.3, 1.2), l2 = uniform(rng, 0.3, 1.2);
    const double c1 = uniform(rng, 0.1, 0.9) * l1, c2 = uniform(rng, 0.1, 0.9) * l2;
    const double i1 = uniform(rng, 0.01, 0.2), i2 = uniform(rng, 0.01, 0.2), g = 9.81;
    const auto arm = planar_two_link(m1, m2, l1, l2, c1, c2, i1, i2, g);
    const VectorXd q = random_vector(rng, 2, kPi), qd = random_vector(rng, 2, 3.0);
    const double cq2 = std::cos(q[1]), sq2 = std::sin(q[1]);

    Eigen::Matrix2d m;
    m(0, 0) = m1 * c1 * c1 + i1 + m2 * (l1 * l1 + c2 * c2 + 2 * l1 * c2 * cq2) + i2;
    m(0, 1) = m(1, 0) = m2 * (c2 * c2 + l1 * c2 * cq2) + i2;
    m(1, 1) = m2 * c2 * c2 + i2;
    const double k = m2 * l1 * c2 * sq2;
    const double g1 = (m1 * c1 + m2 * l1) * g * std::cos(q[0]) + m2 * c2 * g * std::cos(q[0] + q[1]);
    const double g2 = m2 * c2 * g * std::cos(q[0] + q[1]);
    const Eigen::Vector2d h(-k * (2 * qd[0] * qd[1] + qd[1] * qd[1]) + g1, k * qd[0] * qd[0] + g2);

    EXPECT_LT((mass_matrix(arm, q) - m).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((bias_forces(arm, q, qd) - h).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Dynamics, PassivityOfVelocityTerms) {
  // qdot' (Mdot - 2C) qdot = 0 with C qdot = h at zero gravity.
  std::mt19937 rng(9);
  const double delta = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    ManipulatorModel arm = trial % 2 ? test::lwr() : random_model(rng, 7);
    arm.gravity.setZero();
    const VectorXd q = random_vector(rng, 7, kPi), qd = random_vector(rng, 7, 2.0);
    const MatrixXd m_dot =
        (mass_matrix(arm, q + delta * qd) - mass_matrix(arm, q - delta * qd)) / (2 * delta);
    const double lhs = qd.dot(m_dot * qd);
    const double rhs = 2.0 * qd.dot(bias_forces(arm, q, qd));
    EXPECT_NEAR(lhs, rhs, 1e-6 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Dynamics, UnforcedEnergyConserved) {
  ManipulatorModel arm = test::lwr();
  arm.gravity.setZero();
  std::mt19937 rng(10);
  VectorXd q = random_vector(rng, 7, 1.5), qd = random_vector(rng, 7, 1.0);
  const double dt = 1e-4;
  const double e0 = kinetic_energy(arm, {q, qd, 0.0});
  auto accel = [&](const VectorXd& qq, const VectorXd& vv) -> VectorXd {
    return mass_matrix(arm, qq).llt().solve(-bias_forces(arm, qq, vv));
  };
  for (int i = 0; i < 10000; ++i) {
    const VectorXd k1q = qd, k1v = accel(q, qd);
    const VectorXd k2q = qd + 0.5 * dt * k1v, k2v = accel(q + 0.5 * dt * k1q, k2q);
    const VectorXd k3q = qd + 0.5 * dt * k2v, k3v = accel(q + 0.5 * dt * k2q, k3q);
    const VectorXd k4q = qd + dt * k3v, k4v = accel(q + dt * k3q, k4q);
    q += dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q);
    qd += dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  EXPECT_LT(std::abs(kinetic_energy(arm, {q, qd, 0.0}) - e0) / e0, 1e-6);
}

TEST(Dynamics, PotentialEnergyGradientIsGravityTorque) {
  std::mt19937 rng(11);
  const ManipulatorModel arm = test::lwr();
  const VectorXd q = random_vector(rng, 7, 2.0);
  const VectorXd g = bias_forces(arm, q, VectorXd::Zero(7));
  for (int i = 0; i < 7; ++i) {
    VectorXd qp = q, qm = q;
    qp[i] += 1e-6;
    qm[i] -= 1e-6;
    EXPECT_NEAR((potential_energy(arm, qp) - potential_energy(arm, qm)) / 2e-6, g[i], 1e-6);
  }
}

TEST(Skew, CrossProduct) {
  EXPECT_EQ(skew(Vector3d::Zero()), Matrix3d::Zero());
  EXPECT_TRUE((skew(Vector3d::UnitX()) * Vector3d::UnitY()).isApprox(Vector3d::UnitZ()));
  std::mt19937 rng(12);
  for (int i = 0; i < 100; ++i) {
    const Vector3d r = random_vector(rng, 3), v = random_vector(rng, 3);
    EXPECT_LT((skew(r) * v - r.cross(v)).norm(), 1e-15);
  }
}

TEST(Model, YamlRoundTripAndValidation) {
  const ManipulatorModel arm = test::lwr();
  EXPECT_EQ(arm.dof(), 7);
  const ManipulatorModel again = model_from_yaml(model_to_yaml(arm));
  std::mt19937 rng(13);
  const VectorXd q = random_vector(rng, 7, 2.0);
  EXPECT_LT((mass_matrix(arm, q) - mass_matrix(again, q)).norm(), 1e-12);

  YAML::Node bad = model_to_yaml(arm);
  bad["links"][2]["axis"] = vec3_to_yaml(Vector3d(0, 0, 2));
  EXPECT_THROW(model_from_yaml(bad), ConfigError);
  bad = model_to_yaml(arm);
  bad["links"][1]["inertia"] = std::vector<double>{1, -1, 1, 0, 0, 0};
  EXPECT_THROW(model_from_yaml(bad), ConfigError);
}

}  // namespace
}  // namespace pidyn
