#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "spf/control.hpp"
#include "spf/sim.hpp"
#include "test_paths.hpp"

using namespace spf;

namespace {

Limits box(int n, double q, double u) {
  Limits l;
  l.xc_min = VectorXd::Constant(n, -q);
  l.xc_max = VectorXd::Constant(n, q);
  l.u_min = VectorXd::Constant(n, -u);
  l.u_max = VectorXd::Constant(n, u);
  return l;
}

MatrixXd random_spd(int n, std::mt19937& rng) {
  std::normal_distribution<double> g;
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return a * a.transpose() + 0.5 * MatrixXd::Identity(n, n);
}

}  // namespace

TEST(Bias, AffineBetweenLimits) {
  Limits l;
  l.xc_min = Eigen::Vector2d(-1.0, 0.0);
  l.xc_max = Eigen::Vector2d(1.0, 2.0);
  l.u_min = Eigen::Vector2d(-3.0, -1.0);
  l.u_max = Eigen::Vector2d(3.0, 5.0);
  EXPECT_LT((bias_r(l.xc_min, l) - l.u_max).norm(), 1e-15);
  EXPECT_LT((bias_r(l.xc_max, l) - l.u_min).norm(), 1e-15);
  EXPECT_LT((bias_r(Eigen::Vector2d(0.0, 1.0), l) - Eigen::Vector2d(0.0, 2.0)).norm(), 1e-15);
}

TEST(Resolve, MatchesKktSolution) {
  std::mt19937 rng(17);
  std::normal_distribution<double> g;
  const int p = 3, n = 4;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    MatrixXd beta(p, n);
    VectorXd alpha(p), v(p), r(n);
    for (int i = 0; i < p; ++i) {
      alpha(i) = g(rng);
      v(i) = g(rng);
      for (int j = 0; j < n; ++j) beta(i, j) = g(rng);
    }
    for (int j = 0; j < n; ++j) r(j) = g(rng);
    const MatrixXd w = random_spd(n, rng);
    // min ½(u-r)ᵀW(u-r) subject to βu = v - α
    MatrixXd kkt = MatrixXd::Zero(n + p, n + p);
    kkt.topLeftCorner(n, n) = w;
    kkt.topRightCorner(n, p) = beta.transpose();
    kkt.bottomLeftCorner(p, n) = beta;
    VectorXd rhs(n + p);
    rhs << w * r, v - alpha;
    const VectorXd oracle = kkt.fullPivLu().solve(rhs).head(n);
    const VectorXd u = resolve_input(alpha, beta, v, r, w);
    worst = std::max(worst, (u - oracle).norm() / (1.0 + oracle.norm()));
    EXPECT_LT((beta * u + alpha - v).norm(), 1e-9);
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Resolve, SquareBetaIgnoresBias) {
  const MatrixXd beta = (MatrixXd(2, 2) << 2.0, 1.0, -1.0, 3.0).finished();
  const VectorXd alpha = Eigen::Vector2d(0.5, -0.2), v = Eigen::Vector2d(1.0, 2.0);
  const VectorXd u0 = resolve_input(alpha, beta, v, VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  const VectorXd u1 = resolve_input(alpha, beta, v, Eigen::Vector2d(7.0, -4.0), MatrixXd::Identity(2, 2));
  EXPECT_LT((u0 - beta.inverse() * (v - alpha)).norm(), 1e-14);
  EXPECT_LT((u0 - u1).norm(), 1e-13);
}

TEST(Resolve, Example1ClosedForm) {
  const double m2 = 2.0;
  const MatrixXd beta = (MatrixXd(1, 2) << 0.0, 1.0 / m2).finished();
  const VectorXd alpha = VectorXd::Constant(1, 0.3), v = VectorXd::Constant(1, -1.1);
  const VectorXd r = Eigen::Vector2d(0.7, 4.0);
  const VectorXd u = resolve_input(alpha, beta, v, r, MatrixXd::Identity(2, 2));
  EXPECT_NEAR(u(0), 0.7, 1e-15);
  EXPECT_NEAR(u(1), m2 * (-1.1 - 0.3), 1e-14);
}

TEST(Resolve, RejectsNearSingularDecoupling) {
  MatrixXd beta(2, 3);
  beta << 1.0, 2.0, 3.0, 2.0, 4.0, 6.0 + 1e-13;
  try {
    resolve_input(VectorXd::Zero(2), beta, VectorXd::Ones(2), VectorXd::Zero(3), MatrixXd::Identity(3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::near_singular_decoupling);
  }
  EXPECT_THROW(resolve_input(VectorXd::Zero(1), MatrixXd::Ones(1, 2), VectorXd::Ones(1), VectorXd::Zero(2), -MatrixXd::Identity(2, 2)),
               Error);
}

TEST(Resolve, WeightedPseudoinverseIsRightInverse) {
  std::mt19937 rng(2);
  const MatrixXd w = random_spd(4, rng);
  const MatrixXd beta = MatrixXd::Random(2, 4);
  const MatrixXd pinv = weighted_pseudoinverse(beta, w);
  EXPECT_LT((beta * pinv - MatrixXd::Identity(2, 2)).norm(), 1e-12);
}

TEST(Tangential, ProportionalAndIntegral) {
  TangentialGains g;
  g.kp = 2.0;
  g.eta2_ref = ReferenceProfile::constant(0.5);
  ControllerState cs;
  EXPECT_DOUBLE_EQ(tangential_v(0.0, 0.5, 0.0, cs, g, 0.01), 0.0);
  EXPECT_DOUBLE_EQ(tangential_v(0.0, 0.2, 0.0, cs, g, 0.01), 0.6);
  g.ki = 10.0;
  cs = {};
  EXPECT_NEAR(tangential_v(0.0, 0.2, 0.0, cs, g, 0.01), 0.6 + 10.0 * 0.003, 1e-15);
  g.integral_bound = 1e-3;
  cs = {};
  EXPECT_NEAR(tangential_v(0.0, 0.2, 0.0, cs, g, 0.01), 0.6 + 10.0 * 1e-3, 1e-15);
  g.mode = TangentialMode::position_pd;
  g.kd = 3.0;
  g.eta1_ref = 1.0;
  EXPECT_NEAR(tangential_v(0.25, 0.2, 0.0, cs, g, 0.01), 2.0 * 0.75 + 3.0 * 0.3, 1e-15);
  EXPECT_THROW(tangential_v(0.0, 0.0, 0.0, cs, g, 0.0), Error);
}

TEST(Tangential, PiLoopStepResponse) {
  // η̇₂ = v_η with kp = 3, ki = 2: e = η₂ʳᵉᶠ - η₂ obeys ë + 3ė + 2e = 0,
  // e(0) = 1, ė(0) = -3, so e = 2e^{-2t} - e^{-t}.
  TangentialGains g;
  g.kp = 3.0;
  g.ki = 2.0;
  g.eta2_ref = ReferenceProfile::constant(1.0);
  ControllerState cs;
  const double dt = 1e-5;
  double eta2 = 0.0, worst = 0.0;
  for (int i = 0; i < 300000; ++i) {
    const double t = i * dt;
    worst = std::max(worst, std::abs((1.0 - eta2) - (2 * std::exp(-2 * t) - std::exp(-t))));
    eta2 += dt * tangential_v(0.0, eta2, t, cs, g, dt);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Transversal, PdDoubleIntegrator) {
  // ξ̈ = -4ξ - 4ξ̇ is critically damped: ξ = (1 + 2t)e^{-2t}.
  TransversalGains g;
  g.kp = VectorXd::Constant(1, 4.0);
  g.kd = VectorXd::Constant(1, 4.0);
  EXPECT_EQ(transversal_v(VectorXd::Zero(2), g).norm(), 0.0);
  auto rhs = [&](const Eigen::Vector2d& s) { return Eigen::Vector2d(s(1), transversal_v(s, g)(0)); };
  Eigen::Vector2d s(1.0, 0.0);
  const double h = 1e-3;
  double worst = 0.0;
  for (int i = 1; i <= 5000; ++i) {
    const Eigen::Vector2d k1 = rhs(s), k2 = rhs(s + 0.5 * h * k1), k3 = rhs(s + 0.5 * h * k2), k4 = rhs(s + h * k3);
    s += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    const double t = i * h;
    worst = std::max(worst, std::abs(s(0) - (1 + 2 * t) * std::exp(-2 * t)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Transversal, RobustBranchesMeetAtMu) {
  TransversalGains g;
  g.mode = TransversalMode::robust;
  g.mu = 0.05;
  g.k = (MatrixXd(1, 2) << -4.0, -4.0).finished();
  g.k0 = (MatrixXd(1, 2) << -1.0, 0.0).finished();
  g.k2 = (MatrixXd(1, 2) << -2.0, -1.0).finished();
  g.validate(1);
  EXPECT_LT((g.k1() - g.mu * g.mu * g.k2).norm(), 1e-18);
  const Eigen::Vector2d dir = Eigen::Vector2d(0.6, -0.8);
  const double eps = 1e-12;
  const VectorXd below = transversal_v((g.mu - eps) * dir, g);
  const VectorXd above = transversal_v((g.mu + eps) * dir, g);
  EXPECT_NEAR(below(0), above(0), 1e-10);
  EXPECT_EQ(transversal_v(VectorXd::Zero(2), g).norm(), 0.0);
  // Far out the discontinuous term is K₁ξ/‖ξ‖.
  const Eigen::Vector2d far(3.0, 4.0);
  EXPECT_NEAR(transversal_v(far, g)(0), ((g.k + g.k0) * far + g.k1() * far / 5.0)(0), 1e-14);
  g.k2.resize(2, 2);
  EXPECT_THROW(g.validate(1), Error);
}

TEST(Controller, OnPathDecouplesExactly) {
  const auto sys = make_example2(VectorXd::Ones(3));
  const auto path = std::make_shared<SplinePath>(testpaths::gerono_path());
  ControllerConfig cfg;
  cfg.tangential.kp = 2.0;
  cfg.tangential.eta2_ref = ReferenceProfile::constant(0.3);
  cfg.transversal.kp = VectorXd::Constant(1, 25.0);
  cfg.transversal.kd = VectorXd::Constant(1, 10.0);
  cfg.limits = box(3, 3.0, 10.0);
  Controller c(sys, path, cfg);
  InitialCondition ic;
  ic.mode = InitialCondition::Mode::on_path;
  ic.k = 3;
  ic.lambda = 0.1;
  ic.speed = 0.2;
  ic.seed = Eigen::Vector3d(0.3, -0.8, 0.4);
  const State x = initial_state(*sys, *path, ic);
  const auto out = c.step(x, 0.0);
  EXPECT_NEAR(out.z.xi1(0), 0.0, 1e-9);
  EXPECT_NEAR(out.z.xi2(0), 0.0, 1e-9);
  EXPECT_NEAR(out.v(1), 0.0, 1e-7);
  EXPECT_NEAR(out.v(0), 2.0 * (0.3 - 0.2), 1e-9);
  EXPECT_LT((out.beta * out.u + out.alpha - out.v).norm(), 1e-10);
  EXPECT_FALSE(out.saturated);
}

TEST(Controller, SaturationIsReported) {
  const auto sys = make_example2(VectorXd::Ones(3));
  const auto path = std::make_shared<SplinePath>(testpaths::gerono_path());
  ControllerConfig cfg;
  cfg.tangential.kp = 200.0;
  cfg.tangential.eta2_ref = ReferenceProfile::constant(5.0);
  cfg.transversal.kp = VectorXd::Constant(1, 25.0);
  cfg.transversal.kd = VectorXd::Constant(1, 10.0);
  cfg.limits = box(3, 3.0, 1.0);
  cfg.saturate = true;
  Controller c(sys, path, cfg);
  const State x{Eigen::Vector3d(0.3, -0.8, 0.4), VectorXd::Zero(3)};
  const auto out = c.step(x, 0.0);
  EXPECT_TRUE(out.saturated);
  EXPECT_LE(out.u.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_GT(out.u_resolved.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Controller, ConfigValidation) {
  const auto sys = make_example2(VectorXd::Ones(3));
  const auto path = std::make_shared<SplinePath>(testpaths::gerono_path());
  ControllerConfig cfg;
  cfg.transversal.kp = VectorXd::Constant(1, 1.0);
  cfg.transversal.kd = VectorXd::Constant(1, 1.0);
  cfg.limits = box(3, 3.0, 1.0);
  cfg.redundancy.w = MatrixXd::Identity(2, 2);
  EXPECT_THROW(Controller(sys, path, cfg), Error);
  cfg.redundancy.w.resize(0, 0);
  cfg.transversal.kd = VectorXd::Constant(2, 1.0);
  EXPECT_THROW(Controller(sys, path, cfg), Error);
  cfg.transversal.kd = VectorXd::Constant(1, 1.0);
  cfg.limits.xc_max(1) = -5.0;
  EXPECT_THROW(Controller(sys, path, cfg), Error);
}
