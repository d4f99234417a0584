#include <gtest/gtest.h>

#include "pidyn/scenario.hpp"
#include "pidyn/sim.hpp"
#include "test_support.hpp"

namespace pidyn {
namespace {

using test::random_vector;

Scenario shipped_scenario(const std::string& name) { return build_scenario(test::shipped(name)); }

double kinetic_energy(const SimEngine& sim, const JointState& s) {
  const SystemSnapshot snap = make_snapshot(sim.layout(), sim.models(), s);
  return 0.5 * s.qdot.dot(snap.dyn.M * s.qdot);
}

// Joint velocity consistent with the constraint.
VectorXd admissible_velocity(const SimEngine& sim, const VectorXd& q, std::mt19937& rng,
                             double scale) {
  const JointState st{q, VectorXd::Zero(q.size()), 0.0};
  const SystemSnapshot snap = make_snapshot(sim.layout(), sim.layout().arms, st);
  return projector(snap.constraint.jacobian.Jc) * random_vector(rng, q.size(), scale);
}

TEST(ConstrainedAcceleration, GravityCompensationAtRestIsStatic) {
  for (const char* name : {"single_wipe", "dual_hold"}) {
    const Scenario sc = shipped_scenario(name);
    const SimEngine sim(sc.layout, sc.config.integrator);
    const JointState st{sc.initial.q, VectorXd::Zero(sc.layout.dof()), 0.0};
    const SystemSnapshot snap = make_snapshot(sim.layout(), sim.models(), st);
    const SimEngine::Evaluation ev = sim.evaluate(st, snap.dyn.h, Vector6d::Zero());
    EXPECT_LT(ev.qddot.norm(), 1e-9) << name;
  }
}

TEST(ConstrainedAcceleration, UnconstrainedReducesToForwardDynamics) {
  std::mt19937 rng(61);
  const ManipulatorModel arm = test::lwr();
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd q = random_vector(rng, 7, 1.5), qd = random_vector(rng, 7, 1.0);
    const VectorXd tau = random_vector(rng, 7, 10.0);
    const Vector6d fx = random_vector(rng, 6, 5.0);
    DynamicsTerms dyn;
    dyn.M = mass_matrix(arm, q);
    dyn.h = bias_forces(arm, q, qd);
    dyn.Jx = jacobian(arm, q);
    const ConstraintJacobian none{MatrixXd(0, 7), MatrixXd(0, 7)};
    const ProjectionState proj = compute_projection(none, dyn.M, dyn.h, qd, MatrixXd(), MatrixXd());
    const VectorXd expected = dyn.M.ldlt().solve(tau - dyn.h + dyn.Jx.transpose() * fx);
    EXPECT_LT((constrained_acceleration(dyn, proj, qd, tau, fx) - expected).norm(),
              1e-9 * (1.0 + expected.norm()));
  }
}

TEST(ConstrainedAcceleration, SatisfiesConstraintAtRandomStates) {
  std::mt19937 rng(62);
  for (const char* name : {"single_wipe", "dual_hold"}) {
    const Scenario sc = shipped_scenario(name);
    const SimEngine sim(sc.layout, sc.config.integrator);
    const int n = sc.layout.dof();
    for (int trial = 0; trial < 20; ++trial) {
      const JointState st{sc.initial.q, admissible_velocity(sim, sc.initial.q, rng, 1.0), 0.0};
      const SimEngine::Evaluation ev =
          sim.evaluate(st, random_vector(rng, n, 20.0), random_vector(rng, 6, 5.0));
      const ConstraintJacobian& c = ev.snapshot.constraint.jacobian;
      EXPECT_LT((c.Jc * ev.qddot + c.Jc_dot * st.qdot).norm(), 1e-8 * (1.0 + ev.qddot.norm()))
          << name;
    }
  }
}

TEST(TrueConstraintForce, StaticPushIsReflected) {
  std::mt19937 rng(63);
  for (const char* name : {"single_wipe", "dual_hold"}) {
    const Scenario sc = shipped_scenario(name);
    SystemLayout layout = sc.layout;
    layout.object.mass = 0.0;
    const SimEngine sim(layout, sc.config.integrator);
    const JointState st{sc.initial.q, VectorXd::Zero(layout.dof()), 0.0};
    const SystemSnapshot snap = make_snapshot(layout, sim.models(), st);
    const MatrixXd& jc = snap.constraint.jacobian.Jc;
    for (int trial = 0; trial < 10; ++trial) {
      const VectorXd push = random_vector(rng, jc.rows(), 10.0);
      const SimEngine::Evaluation ev = sim.evaluate(st, snap.dyn.h + jc.transpose() * push, Vector6d::Zero());
      EXPECT_LT(ev.qddot.norm(), 1e-9);
      // The environment answers with the opposite multipliers.
      EXPECT_LT((ev.lambda + push).norm(), 1e-9 * (1.0 + push.norm())) << name;
    }
  }
}

TEST(SimEngine, KineticEnergyNonIncreasingWithoutTorqueOrGravity) {
  std::mt19937 rng(64);
  for (const char* name : {"single_wipe", "dual_hold"}) {
    const Scenario sc = shipped_scenario(name);
    SystemLayout layout = sc.layout;
    for (auto& arm : layout.arms) arm.gravity.setZero();
    IntegratorConfig cfg = sc.config.integrator;
    cfg.method = IntegrationMethod::RK4;
    cfg.dt = 1e-3;
    const SimEngine sim(layout, cfg);
    JointState st{sc.initial.q, admissible_velocity(sim, sc.initial.q, rng, 0.5), 0.0};
    const VectorXd zero = VectorXd::Zero(layout.dof());
    double energy = kinetic_energy(sim, st);
    const double initial = energy;
    for (int i = 0; i < 500; ++i) {
      st = sim.step(st, zero, Vector6d::Zero());
      const double next = kinetic_energy(sim, st);
      EXPECT_LE(next, energy + 1e-9 * initial) << name << " step " << i;
      energy = next;
    }
    EXPECT_GT(energy, 0.5 * initial) << name;
  }
}

TEST(SimEngine, SemiImplicitEulerConvergesAtFirstOrder) {
  std::mt19937 rng(65);
  const Scenario sc = shipped_scenario("single_wipe");
  const double duration = 0.2;
  const VectorXd tau = random_vector(rng, sc.layout.dof(), 2.0);
  const VectorXd qd0 = admissible_velocity(SimEngine(sc.layout, sc.config.integrator),
                                           sc.initial.q, rng, 0.3);
  auto final_q = [&](IntegrationMethod method, double dt) {
    IntegratorConfig cfg = sc.config.integrator;
    cfg.method = method;
    cfg.dt = dt;
    const SimEngine sim(sc.layout, cfg);
    JointState st{sc.initial.q, qd0, 0.0};
    const int steps = static_cast<int>(std::llround(duration / dt));
    for (int i = 0; i < steps; ++i) st = sim.step(st, tau, Vector6d::Zero());
    return st.q;
  };
  const VectorXd reference = final_q(IntegrationMethod::RK4, 1e-4);
  const double e1 = (final_q(IntegrationMethod::SemiImplicitEuler, 4e-3) - reference).norm();
  const double e2 = (final_q(IntegrationMethod::SemiImplicitEuler, 2e-3) - reference).norm();
  const double e3 = (final_q(IntegrationMethod::SemiImplicitEuler, 1e-3) - reference).norm();
  EXPECT_GT(e1 / e2, 1.6);
  EXPECT_LT(e1 / e2, 2.5);
  EXPECT_GT(e2 / e3, 1.6);
  EXPECT_LT(e2 / e3, 2.5);
}

VectorXd drive_grasp(const Scenario& sc, bool position_correction, int steps) {
  std::mt19937 rng(66);
  IntegratorConfig cfg = sc.config.integrator;
  cfg.position_correction = position_correction;
  const SimEngine sim(sc.layout, cfg);
  JointState st = sc.initial;
  for (int i = 0; i < steps; ++i) {
    const SystemSnapshot snap = make_snapshot(sc.layout, sim.models(), st);
    const VectorXd tau = snap.dyn.h + random_vector(rng, sc.layout.dof(), 3.0) - 5.0 * st.qdot;
    double drift = 0.0;
    st = sim.step(st, tau, Vector6d::Zero(), &drift);
    EXPECT_LT(drift, 1e-9);
  }
  EXPECT_GT((st.q - sc.initial.q).norm(), 1e-3);
  return sim.position_error(st.q);
}

TEST(SimEngine, GraspStaysRigidUnderRandomTorques) {
  const Scenario sc = shipped_scenario("dual_hold");
  EXPECT_LT(SimEngine(sc.layout, sc.config.integrator).position_error(sc.initial.q).norm(), 1e-9);
  EXPECT_LT(drive_grasp(sc, true, 300).norm(), 1e-10);
  // Velocity projection alone keeps the position drift second order in dt.
  EXPECT_LT(drive_grasp(sc, false, 300).norm(), 1e-5);
}

TEST(SimEngine, RejectsNonPositiveStep) {
  const Scenario sc = shipped_scenario("single_wipe");
  IntegratorConfig cfg;
  cfg.dt = 0.0;
  EXPECT_THROW(SimEngine(sc.layout, cfg), ConfigError);
  cfg.dt = -1e-3;
  EXPECT_THROW(SimEngine(sc.layout, cfg), ConfigError);
}

TEST(LoadedModels, AddedMassAppearsAsTaskPointWeight) {
  const Scenario sc = shipped_scenario("single_wipe");
  const JointState st{sc.initial.q, VectorXd::Zero(sc.layout.dof()), 0.0};
  const SystemSnapshot bare = make_snapshot(sc.layout, loaded_models(sc.layout, 0.0), st);
  const SystemSnapshot loaded = make_snapshot(sc.layout, loaded_models(sc.layout, 0.5), st);
  const MatrixXd& jx = bare.dyn.Jx;
  const VectorXd wrench = pseudoinverse(jx.transpose()).pinv * (loaded.dyn.h - bare.dyn.h);
  Vector6d expected = Vector6d::Zero();
  expected[kLinear + 2] = 0.5 * 9.81;
  EXPECT_LT((wrench - expected).norm(), 1e-9);
}

TEST(Disturbances, EmptyProfileIsQuiet) {
  DisturbanceInjector injector(DisturbanceProfile{});
  for (double t : {0.0, 1.0, 100.0}) {
    const DisturbanceSample s = injector.sample(t, Pose{}, Vector6d::Zero());
    EXPECT_EQ(s.wrench, Vector6d::Zero());
    EXPECT_EQ(s.added_mass, 0.0);
    EXPECT_FALSE(s.clamped);
  }
}

TEST(Disturbances, RampedSegmentWeight) {
  DisturbanceSegment seg;
  seg.t_start = 1.0;
  seg.t_end = 2.0;
  EXPECT_EQ(seg.weight(0.999), 0.0);
  EXPECT_EQ(seg.weight(1.0), 1.0);
  EXPECT_EQ(seg.weight(2.0), 0.0);
  seg.ramp = 0.5;
  const std::pair<double, double> expected[] = {
      {0.9, 0.0}, {1.0, 0.0}, {1.25, 0.5}, {1.5, 1.0}, {1.9, 1.0}, {2.25, 0.5}, {2.5, 0.0}, {3.0, 0.0}};
  for (const auto& [t, w] : expected) EXPECT_NEAR(seg.weight(t), w, 1e-12) << t;
}

TEST(Disturbances, ConstantWrenchAndAddedMass) {
  DisturbanceProfile profile;
  DisturbanceSegment push;
  push.t_start = 1.0;
  push.t_end = 2.0;
  push.wrench << 0, 0, 0, 0, 10.0, 0;
  DisturbanceSegment load;
  load.type = DisturbanceType::AddedMass;
  load.t_start = 1.5;
  load.t_end = 3.0;
  load.mass = 0.5;
  profile.segments = {push, load};
  DisturbanceInjector injector(profile);
  EXPECT_EQ(injector.sample(0.5, Pose{}, Vector6d::Zero()).wrench, Vector6d::Zero());
  const DisturbanceSample a = injector.sample(1.2, Pose{}, Vector6d::Zero());
  EXPECT_EQ(a.wrench[kLinear + 1], 10.0);
  EXPECT_EQ(a.added_mass, 0.0);
  const DisturbanceSample b = injector.sample(2.5, Pose{}, Vector6d::Zero());
  EXPECT_EQ(b.wrench, Vector6d::Zero());
  EXPECT_EQ(b.added_mass, 0.5);
}

TEST(Disturbances, PoseClampAnchorsAtFirstEngagedTick) {
  DisturbanceSegment clamp;
  clamp.type = DisturbanceType::PoseClamp;
  clamp.t_start = 1.0;
  clamp.t_end = 2.0;
  clamp.stiffness = 1000.0;
  clamp.damping = 10.0;
  DisturbanceInjector injector(DisturbanceProfile{{clamp}});
  Pose pose;
  pose.position = Vector3d(0.5, 0.1, 0.3);
  EXPECT_FALSE(injector.sample(0.9, pose, Vector6d::Zero()).clamped);
  const DisturbanceSample first = injector.sample(1.0, pose, Vector6d::Zero());
  EXPECT_TRUE(first.clamped);
  EXPECT_LT(first.wrench.norm(), 1e-12);
  Pose moved = pose;
  moved.position += Vector3d(0.01, 0.0, -0.02);
  Vector6d twist = Vector6d::Zero();
  twist.segment<3>(kLinear) = Vector3d(0.1, 0.0, 0.0);
  const DisturbanceSample later = injector.sample(1.5, moved, twist);
  EXPECT_LT((later.wrench.segment<3>(kLinear) - Vector3d(-11.0, 0.0, 20.0)).norm(), 1e-9);
  EXPECT_LT(later.wrench.segment<3>(kAngular).norm(), 1e-15);
  EXPECT_FALSE(injector.sample(2.0, moved, twist).clamped);
}

TEST(Disturbances, NoiseIsSeeded) {
  DisturbanceSegment noise;
  noise.type = DisturbanceType::WrenchNoise;
  noise.t_start = 0.0;
  noise.t_end = 1.0;
  noise.noise_std = 2.0;
  DisturbanceInjector a(DisturbanceProfile{{noise}}, 7), b(DisturbanceProfile{{noise}}, 7),
      c(DisturbanceProfile{{noise}}, 8);
  bool differs = false;
  for (int i = 0; i < 10; ++i) {
    const Vector6d wa = a.sample(0.1 * i, Pose{}, Vector6d::Zero()).wrench;
    EXPECT_EQ(wa, b.sample(0.1 * i, Pose{}, Vector6d::Zero()).wrench);
    differs = differs || wa != c.sample(0.1 * i, Pose{}, Vector6d::Zero()).wrench;
    EXPECT_EQ(wa.segment<3>(kAngular), Vector3d::Zero());
  }
  EXPECT_TRUE(differs);
}

TEST(Disturbances, OverlappingSegmentsOfSameTypeRejected) {
  DisturbanceSegment a;
  a.t_start = 0.0;
  a.t_end = 2.0;
  DisturbanceSegment b = a;
  b.t_start = 1.0;
  b.t_end = 3.0;
  EXPECT_THROW(DisturbanceInjector(DisturbanceProfile{{a, b}}), ConfigError);
  b.type = DisturbanceType::AddedMass;
  b.mass = 1.0;
  EXPECT_NO_THROW(DisturbanceInjector(DisturbanceProfile{{a, b}}));
  DisturbanceSegment backwards = a;
  backwards.t_end = -1.0;
  EXPECT_THROW(DisturbanceInjector(DisturbanceProfile{{backwards}}), ConfigError);
}

}  // namespace
}  // namespace pidyn
