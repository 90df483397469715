#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "spf/curves.hpp"
#include "test_paths.hpp"

using namespace spf;

TEST(SplineDegree, OddDegreeCoveringSmoothness) {
  EXPECT_EQ(spline_degree(0), 1);
  EXPECT_EQ(spline_degree(1), 3);
  EXPECT_EQ(spline_degree(2), 3);
  EXPECT_EQ(spline_degree(3), 5);
  EXPECT_EQ(spline_degree(4), 5);
  EXPECT_THROW(spline_degree(-1), Error);
}

TEST(FitSpline, TwoCollinearWaypointsGiveTheLine) {
  const auto path = fit_spline({Eigen::Vector2d(1, 2), Eigen::Vector2d(4, 6)}, false);
  ASSERT_EQ(path.size(), 1);
  const auto& seg = path.segment(0);
  EXPECT_EQ(seg.degree(), 5);
  EXPECT_DOUBLE_EQ(seg.width(), 5.0);
  for (double l : {0.0, 1.3, 2.5, 5.0}) {
    EXPECT_LT((seg.derivative(l, 0) - Eigen::Vector2d(1 + 0.6 * l, 2 + 0.8 * l)).norm(), 1e-12);
    for (int r = 2; r <= 3; ++r) EXPECT_LT(seg.derivative(l, r).norm(), 1e-12) << r;
  }
}

TEST(FitSpline, FifteenWaypointsGiveFourteenC4Quintics) {
  const auto wp = testpaths::fifteen_waypoints();
  const auto path = fit_spline(wp, false);
  ASSERT_EQ(path.size(), 14);
  for (int k = 0; k < path.size(); ++k) {
    EXPECT_EQ(path.segment(k).degree(), 5);
    EXPECT_DOUBLE_EQ(path.segment(k).width(), (wp[static_cast<std::size_t>(k + 1)] - wp[static_cast<std::size_t>(k)]).norm());
    EXPECT_LT((path.evaluate(k, 0.0, 0) - wp[static_cast<std::size_t>(k)]).norm(), 1e-10);
    EXPECT_LT((path.evaluate(k, path.segment(k).lambda_max(), 0) - wp[static_cast<std::size_t>(k + 1)]).norm(), 1e-10);
  }
  for (int k = 0; k + 1 < path.size(); ++k) {
    const auto& a = path.segment(k);
    const auto& b = path.segment(k + 1);
    for (int r = 0; r <= 4; ++r) {
      const VectorXd left = a.derivative(a.lambda_max(), r);
      EXPECT_LT((left - b.derivative(0.0, r)).norm() / (1.0 + left.norm()), 1e-8) << "junction " << k << " order " << r;
    }
  }
  const auto rep = check_assumptions(path);
  EXPECT_TRUE(rep.smooth_ok);
  EXPECT_LT(rep.worst_junction_error, 1e-8);
}

TEST(FitSpline, OpenEndsHaveZeroSecondAndThirdDerivative) {
  const auto path = fit_spline(testpaths::fifteen_waypoints(), false);
  const auto& first = path.segment(0);
  const auto& last = path.segment(path.size() - 1);
  for (int r = 2; r <= 3; ++r) {
    EXPECT_LT(first.derivative(0.0, r).norm(), 1e-9);
    EXPECT_LT(last.derivative(last.lambda_max(), r).norm(), 1e-9);
  }
}

TEST(FitSpline, ClosedPathWrapsSmoothly) {
  std::vector<VectorXd> wp;
  for (int i = 0; i < 6; ++i) {
    const double a = 2 * std::numbers::pi * i / 6;
    wp.push_back(Eigen::Vector2d(std::cos(a), 0.7 * std::sin(a)));
  }
  const auto path = fit_spline(wp, true);
  ASSERT_EQ(path.size(), 6);
  EXPECT_EQ(path.next(5), 0);
  EXPECT_EQ(path.prev(0), 5);
  const auto rep = check_assumptions(path);
  EXPECT_TRUE(rep.smooth_ok) << rep.worst_junction_error;
  EXPECT_TRUE(rep.framed_ok);
}

TEST(FitSpline, FigureEightCrossesItself) {
  const auto path = fit_spline(testpaths::figure_eight_four(), false);
  // Brute force: closest pair of samples on non-adjacent stretches.
  double best = 1e9;
  int kb = -1, kc = -1;
  double lb = 0, lc = 0;
  const int n = 400;
  for (int k1 = 0; k1 < path.size(); ++k1) {
    for (int k2 = k1; k2 < path.size(); ++k2) {
      const auto& s1 = path.segment(k1);
      const auto& s2 = path.segment(k2);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double l1 = s1.width() * i / (n - 1), l2 = s2.width() * j / (n - 1);
          if (k1 == k2 && std::abs(l1 - l2) < 0.3 * s1.width()) continue;
          if (k2 == k1 + 1 && (s1.width() - l1) + l2 < 0.3 * s1.width()) continue;
          const double d = (s1.derivative(l1, 0) - s2.derivative(l2, 0)).norm();
          if (d < best) {
            best = d;
            kb = k1, kc = k2, lb = l1, lc = l2;
          }
        }
      }
    }
  }
  EXPECT_LT(best, 0.02);
  EXPECT_NE(kb, kc);
  // Newton on σ_kb(l₁) - σ_kc(l₂) = 0 from the sampled pair.
  const auto& s1 = path.segment(kb);
  const auto& s2 = path.segment(kc);
  for (int it = 0; it < 20; ++it) {
    const Eigen::Vector2d r = s1.derivative(lb, 0) - s2.derivative(lc, 0);
    Eigen::Matrix2d jac;
    jac << s1.derivative(lb, 1), -s2.derivative(lc, 1);
    const Eigen::Vector2d step = jac.lu().solve(r);
    lb -= step(0);
    lc -= step(1);
  }
  EXPECT_TRUE(s1.contains(lb));
  EXPECT_TRUE(s2.contains(lc));
  EXPECT_LT((path.evaluate(kb, lb, 0) - path.evaluate(kc, lc, 0)).norm(), 1e-12);
}

TEST(FitSpline, DegenerateChordAndBadInput) {
  try {
    fit_spline({Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(2, 1)}, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_chord);
    EXPECT_EQ(e.index().value_or(-1), 1);
  }
  EXPECT_THROW(fit_spline({Eigen::Vector2d(0, 0)}, false), Error);
  EXPECT_THROW(fit_spline({Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)}, true), Error);
}

TEST(Evaluate, EllipseAdapterAndChecks) {
  const SplinePath path({ellipse_segment(2.0, 1.0, -std::numbers::pi, std::numbers::pi)}, true);
  EXPECT_LT((path.evaluate(0, 0.0, 1) - Eigen::Vector2d(0, 1)).norm(), 1e-15);
  EXPECT_LT((path.evaluate(0, 0.0, 0) - Eigen::Vector2d(2, 0)).norm(), 1e-15);
  EXPECT_LT((path.evaluate(0, 0.0, 2) - Eigen::Vector2d(-2, 0)).norm(), 1e-15);
  try {
    path.evaluate(0, 4.0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::domain);
  }
  try {
    path.evaluate(0, 0.0, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unsupported_order);
  }
  EXPECT_NO_THROW(path.evaluate(0, 0.0, 3));
}

TEST(Evaluate, DerivativesMatchFiniteDifferences) {
  const auto path = fit_spline(testpaths::fifteen_waypoints(), false);
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = static_cast<int>(rng() % 14);
    const auto& seg = path.segment(k);
    std::uniform_real_distribution<double> u(0.1 * seg.width(), 0.9 * seg.width());
    const double l = u(rng);
    // order 3 against a central difference of order 2
    const double h = 1e-4 * seg.width();
    const VectorXd fd3 = (seg.derivative(l + h, 2) - seg.derivative(l - h, 2)) / (2 * h);
    const VectorXd d3 = seg.derivative(l, 3);
    EXPECT_LT((fd3 - d3).norm(), 1e-6 * std::max(1.0, d3.norm()));
    // order 1 and 2 against differences of the position
    const double g = 1e-4 * seg.width();
    const VectorXd fd1 = (seg.derivative(l + g, 0) - seg.derivative(l - g, 0)) / (2 * g);
    const VectorXd fd2 = (seg.derivative(l + g, 0) - 2 * seg.derivative(l, 0) + seg.derivative(l - g, 0)) / (g * g);
    EXPECT_LT((fd1 - seg.derivative(l, 1)).norm(), 1e-5 * std::max(1.0, fd1.norm()));
    EXPECT_LT((fd2 - seg.derivative(l, 2)).norm(), 1e-5 * std::max(1.0, fd2.norm()) + 1e-4);
  }
}

TEST(Arclength, ClosedFormsAndTrapezoid) {
  EXPECT_NEAR(segment_arclength(circle_segment(2.0, 0.0, std::numbers::pi), std::numbers::pi), 2 * std::numbers::pi, 1e-8);
  const auto line = line_segment(Eigen::Vector2d(1, 1), Eigen::Vector2d(0.6, 0.8), 0.0, 3.0);
  EXPECT_NEAR(segment_arclength(line, 2.25), 2.25, 1e-14);
  EXPECT_NEAR(segment_arclength(helix_segment(1.0, 0.5, 0.0, 4.0), 4.0), 4.0 * std::sqrt(1.25), 1e-10);

  const auto path = fit_spline(testpaths::fifteen_waypoints(), false);
  const auto& seg = path.segment(6);
  const int n = 1000000;
  const double h = seg.width() / n;
  double trap = 0.5 * (seg.derivative(0.0, 1).norm() + seg.derivative(seg.width(), 1).norm());
  for (int i = 1; i < n; ++i) trap += seg.derivative(i * h, 1).norm();
  trap *= h;
  EXPECT_NEAR(path.segment_length(6), trap, 1e-7);

  double prev = 0.0;
  for (double c : path.cumulative_arclength()) {
    EXPECT_GT(c, prev);
    prev = c;
  }
  EXPECT_DOUBLE_EQ(path.arclength_offset(0), 0.0);
  EXPECT_DOUBLE_EQ(path.arclength_offset(3), path.cumulative_arclength()[2]);
}

TEST(Assumptions, LineCircleAndMismatchedJunction) {
  const SplinePath line({line_segment(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), 0.0, 1.0)}, false);
  EXPECT_FALSE(check_assumptions(line).framed_ok);
  const SplinePath circle({circle_segment(1.0, 0.0, 2 * std::numbers::pi)}, true);
  const auto rc = check_assumptions(circle);
  EXPECT_TRUE(rc.framed_ok);
  EXPECT_NEAR(rc.min_gram_determinant, 1.0, 1e-12);

  // Two quintics agreeing to order 2 at the junction; the third derivative differs by 6·0.5 = 3.
  MatrixXd a = MatrixXd::Zero(2, 6), b = MatrixXd::Zero(2, 6);
  a.col(1) << 1, 0;
  a.col(2) << 0, 1;
  b.col(0) = a.col(0) + a.col(1) + a.col(2);  // value at λ = 1
  b.col(1) = a.col(1) + 2 * a.col(2);
  b.col(2) = a.col(2);
  b.col(3) << 0, 0.5;
  const SplinePath stitched({CurveSegment::polynomial(a, 0, 1), CurveSegment::polynomial(b, 0, 1)}, false);
  const auto rs = check_assumptions(stitched);
  EXPECT_FALSE(rs.smooth_ok);
  EXPECT_EQ(rs.worst_junction, 0);
  EXPECT_EQ(rs.worst_junction_order, 3);
  EXPECT_NEAR(rs.worst_junction_error, 3.0 / 1.0, 1e-12);  // left third derivative is zero
}

TEST(Path, NeighboursAndDimensionChecks) {
  const auto open = fit_spline(testpaths::fifteen_waypoints(), false);
  EXPECT_EQ(open.next(13), -1);
  EXPECT_EQ(open.prev(0), -1);
  EXPECT_EQ(open.next(3), 4);
  EXPECT_EQ(open.max_order(), 4);
  EXPECT_THROW(SplinePath({circle_segment(1, 0, 1), helix_segment(1, 1, 0, 1)}, false), Error);
  EXPECT_THROW(SplinePath({}, false), Error);
}
