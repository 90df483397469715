#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "spf/dynamics.hpp"

using namespace spf;

namespace {

State state(VectorXd q, VectorXd v) { return {std::move(q), std::move(v)}; }

VectorXd random_vector(std::mt19937& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

MatrixXd fd_jacobian(const MechanicalSystem& sys, const VectorXd& q, double h = 1e-6) {
  MatrixXd j(sys.output_dim(), sys.dof());
  for (int m = 0; m < sys.dof(); ++m) {
    const VectorXd e = VectorXd::Unit(sys.dof(), m) * h;
    j.col(m) = (sys.output(q + e) - sys.output(q - e)) / (2 * h);
  }
  return j;
}

}  // namespace

TEST(Example1, AtRest) {
  const auto sys = make_example1(2.0, 3.0, 1.0, 1.0);
  const auto fg = drift_and_input(*sys, state(Eigen::Vector2d(0.4, -0.2), Eigen::Vector2d::Zero()));
  EXPECT_LT(fg.f_v.norm(), 1e-15);
  EXPECT_LT((fg.g_v - Eigen::Vector2d(0.5, 1.0 / 3.0).asDiagonal().toDenseMatrix()).norm(), 1e-15);
  EXPECT_LT(sys->coriolis(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)).norm(), 1e-15);
  EXPECT_LT(sys->gravity(Eigen::Vector2d(1, 2)).norm(), 1e-15);
}

TEST(Example1, StateMatrixRows) {
  // State (x₁, x₂, x₃, x₄) = (q₁, q̇₁, q₂, q̇₂); velocity rows of the linear system.
  const auto sys = make_example1(1, 1, 1, 1);
  MatrixXd rows(2, 4);
  for (int c = 0; c < 4; ++c) {
    VectorXd x = VectorXd::Unit(4, c);
    const VectorXd f = drift_and_input(*sys, state(Eigen::Vector2d(x(0), x(2)), Eigen::Vector2d(x(1), x(3)))).f_v;
    rows.col(c) = f;
  }
  EXPECT_LT((rows.row(0) - Eigen::RowVector4d(0, -2, 0, 1)).norm(), 1e-15);
  EXPECT_LT((rows.row(1) - Eigen::RowVector4d(0, 1, 0, -1)).norm(), 1e-15);
}

TEST(Example1, DecoupledWithoutSpring) {
  TwoMassModel m;
  m.m2 = 2.0;
  m.b2 = 0.0;
  const LagrangianSystem<TwoMassModel> sys(m);
  const VectorXd acc = acceleration(sys, state(Eigen::Vector2d(0.3, 0.1), Eigen::Vector2d(0.5, -0.7)), Eigen::Vector2d(0.0, 4.0));
  EXPECT_NEAR(acc(1), 2.0, 1e-15);
  EXPECT_NEAR(acc(0), -0.5, 1e-15);  // -b₁ q̇₁ / m₁
}

TEST(Example1, ImpulseResponseMatchesClosedForm) {
  // Unit masses and dampers: v̇ = A v, A = [[-2, 1], [1, -1]], v(0) = M⁻¹e₂.
  const auto sys = make_example1(1, 1, 1, 1);
  const double r5 = std::sqrt(5.0);
  const double l1 = (-3 + r5) / 2, l2 = (-3 - r5) / 2;
  // Eigenvectors (1, 2 + λ) of A.
  const Eigen::Vector2d w1(1, 2 + l1), w2(1, 2 + l2);
  Eigen::Matrix2d w;
  w << w1, w2;
  const Eigen::Vector2d c = w.inverse() * Eigen::Vector2d(0, 1);
  // RK4 on the plant's own acceleration.
  State x = state(Eigen::Vector2d::Zero(), Eigen::Vector2d(0, 1));
  const double h = 1e-3;
  auto f = [&](const State& s) { return State{s.xv, acceleration(*sys, s, Eigen::Vector2d::Zero())}; };
  auto add = [](const State& a, const State& b, double t) { return State{a.xc + t * b.xc, a.xv + t * b.xv}; };
  for (int i = 1; i <= 3000; ++i) {
    const State k1 = f(x), k2 = f(add(x, k1, h / 2)), k3 = f(add(x, k2, h / 2)), k4 = f(add(x, k3, h));
    x.xc += h / 6 * (k1.xc + 2 * k2.xc + 2 * k3.xc + k4.xc);
    x.xv += h / 6 * (k1.xv + 2 * k2.xv + 2 * k3.xv + k4.xv);
    if (i % 500 == 0) {
      const double t = i * h;
      const Eigen::Vector2d v = c(0) * std::exp(l1 * t) * w1 + c(1) * std::exp(l2 * t) * w2;
      const Eigen::Vector2d q = c(0) * (std::exp(l1 * t) - 1) / l1 * w1 + c(1) * (std::exp(l2 * t) - 1) / l2 * w2;
      EXPECT_LT((x.xv - v).norm(), 1e-10);
      EXPECT_LT((x.xc - q).norm(), 1e-10);
    }
  }
}

TEST(Example1, ParameterValidation) {
  EXPECT_THROW(make_example1(0, 1, 1, 1), Error);
  EXPECT_THROW(make_system("example1", Eigen::Vector3d(1, 1, 1)), Error);
  try {
    make_system("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_config);
  }
}

TEST(Example2, StraightArmKinematics) {
  const auto sys = make_example2(VectorXd::Ones(3));
  const VectorXd q = VectorXd::Zero(3);
  EXPECT_LT((sys->output(q) - Eigen::Vector2d(3, 0)).norm(), 1e-15);
  MatrixXd j(2, 3);
  j << 0, 0, 0, 3, 2, 1;
  EXPECT_LT((sys->jacobian(q) - j).norm(), 1e-15);
  // Point masses at 0.5, 1.5, 2.5 plus unit rotational inertia per link.
  EXPECT_NEAR(sys->inertia(q)(2, 2), 1.25, 1e-15);
  EXPECT_NEAR(sys->inertia(q)(0, 0), 0.25 + 2.25 + 6.25 + 3.0, 1e-14);
}

TEST(Example2, InertiaIsSymmetricPositiveDefinite) {
  const auto sys = make_example2(VectorXd::Ones(3));
  std::mt19937 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const MatrixXd d = sys->inertia(random_vector(rng, 3, std::numbers::pi));
    EXPECT_LT((d - d.transpose()).norm(), 1e-14);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatrixXd>(d).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Example2, JacobianAndRateAgainstFiniteDifferences) {
  const auto sys = make_example2(VectorXd::Ones(3));
  std::mt19937 rng(2);
  for (int i = 0; i < 50; ++i) {
    const VectorXd q = random_vector(rng, 3, 3.0), v = random_vector(rng, 3, 2.0);
    EXPECT_LT((sys->jacobian(q) - fd_jacobian(*sys, q)).norm(), 1e-8);
    const double h = 1e-5;
    const VectorXd fd = (sys->jacobian(q + h * v) * v - sys->jacobian(q - h * v) * v) / (2 * h);
    EXPECT_LT((sys->jacobian_rate_contraction(q, v) - fd).norm(), 1e-7);
  }
}

TEST(Example2, NoDriftAtRest) {
  const auto sys = make_example2(VectorXd::Ones(3));
  EXPECT_LT(drift_and_input(*sys, state(Eigen::Vector3d(0.3, -1.0, 2.0), VectorXd::Zero(3))).f_v.norm(), 1e-15);
}

TEST(Example2, EnergyBalanceAndSkewSymmetry) {
  const auto sys = make_example2(Eigen::Vector3d(0.5, 1.0, 1.5));
  std::mt19937 rng(4);
  for (int i = 0; i < 100; ++i) {
    const VectorXd q = random_vector(rng, 3, 3.0), v = random_vector(rng, 3, 2.0);
    MatrixXd ddot = MatrixXd::Zero(3, 3);
    for (int m = 0; m < 3; ++m) ddot += sys->inertia_partial(q, m) * v(m);
    const MatrixXd n = ddot - 2 * sys->coriolis(q, v);
    EXPECT_LT((n + n.transpose()).norm(), 1e-12);
    const VectorXd a = acceleration(*sys, state(q, v), VectorXd::Zero(3));
    const double power = v.dot(sys->inertia(q) * a) + 0.5 * v.dot(ddot * v);
    EXPECT_NEAR(power, -v.dot(sys->damping(q) * v), 1e-8);
  }
}

TEST(Cpm4, ForwardKinematicsAndRank) {
  const auto sys = make_cpm_like();
  const auto& m = sys->model();
  // Straight up.
  const VectorXd up = Eigen::Vector4d(0.3, std::numbers::pi / 2, 0, 0);
  EXPECT_LT((sys->output(up) - Eigen::Vector3d(0, 0, 0.30 + 1.15)).norm(), 1e-14);
  // Generic pose from the planar chain formula.
  const VectorXd q = Eigen::Vector4d(0.4, 0.6, -0.9, 0.5);
  const double p1 = 0.6, p2 = -0.3, p3 = 0.2;
  const double r = 0.45 * std::cos(p1) + 0.40 * std::cos(p2) + 0.30 * std::cos(p3);
  const double z = m.base_height + 0.45 * std::sin(p1) + 0.40 * std::sin(p2) + 0.30 * std::sin(p3);
  EXPECT_LT((sys->output(q) - Eigen::Vector3d(r * std::cos(0.4), r * std::sin(0.4), z)).norm(), 1e-15);

  std::mt19937 rng(5);
  for (int i = 0; i < 200; ++i) {
    VectorXd qq = random_vector(rng, 4, 1.0);
    qq(1) += 0.6;
    qq(2) -= 1.2;  // elbow bent away from the stretched singularity
    const MatrixXd j = sys->jacobian(qq);
    EXPECT_LT((j - fd_jacobian(*sys, qq)).norm(), 1e-8);
    Eigen::JacobiSVD<MatrixXd> svd(j);
    EXPECT_GT(svd.singularValues()(2), 1e-6);
  }
  EXPECT_EQ(completion_state(*sys, state(q, Eigen::Vector4d(1, 2, 3, 4))).size(), 2);
  EXPECT_DOUBLE_EQ(completion_state(*sys, state(q, Eigen::Vector4d(1, 2, 3, 4)))(1), 9.0);
}

TEST(Cpm4, GravityIsPotentialGradient) {
  const auto sys = make_cpm_like();
  std::mt19937 rng(6);
  for (int i = 0; i < 20; ++i) {
    const VectorXd q = random_vector(rng, 4, 1.5);
    VectorXd fd(4);
    for (int m = 0; m < 4; ++m) {
      const VectorXd e = VectorXd::Unit(4, m) * 1e-6;
      fd(m) = (sys->potential_energy(q + e) - sys->potential_energy(q - e)) / 2e-6;
    }
    EXPECT_LT((sys->gravity(q) - fd).norm(), 1e-7);
    EXPECT_NEAR(sys->gravity(q)(0), 0.0, 1e-15);  // yaw does not lift anything
  }
}

TEST(Cpm4, EnergyBalanceWithGravity) {
  const auto sys = make_cpm_like();
  std::mt19937 rng(8);
  for (int i = 0; i < 50; ++i) {
    const VectorXd q = random_vector(rng, 4, 1.5), v = random_vector(rng, 4, 1.0);
    MatrixXd ddot = MatrixXd::Zero(4, 4);
    for (int m = 0; m < 4; ++m) ddot += sys->inertia_partial(q, m) * v(m);
    const VectorXd a = acceleration(*sys, state(q, v), VectorXd::Zero(4));
    const double power = v.dot(sys->inertia(q) * a) + 0.5 * v.dot(ddot * v) + sys->gravity(q).dot(v);
    EXPECT_NEAR(power, -v.dot(sys->damping(q) * v), 1e-8);
  }
}

TEST(Dynamics, NonPositiveInertiaIsReported) {
  PlanarArmModel m;
  m.mass = Eigen::Vector3d(1, 1, -50);
  m.rot = Eigen::Vector3d(1, 1, -50);
  const LagrangianSystem<PlanarArmModel> sys(m);
  try {
    drift_and_input(sys, state(VectorXd::Zero(3), VectorXd::Zero(3)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::non_spd_inertia);
  }
}
