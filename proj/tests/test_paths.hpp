#ifndef SPF_TEST_PATHS_HPP
#define SPF_TEST_PATHS_HPP

// Waypoint sets shared by the tests and the acceptance binary.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "spf/curves.hpp"

namespace testpaths {

// A non-planar sweep in front of the 4-DOF arm, inside its reach. The phase
// offset breaks the point symmetry that would put an inflection mid-path.
inline std::vector<Eigen::VectorXd> fifteen_waypoints() {
  std::vector<Eigen::VectorXd> wp;
  for (int i = 0; i < 15; ++i) {
    const double t = i / 14.0;
    wp.push_back(Eigen::Vector3d(0.55 + 0.08 * std::sin(2 * std::numbers::pi * t), -0.3 + 0.6 * t,
                                 0.35 + 0.1 * std::cos(3 * std::numbers::pi * t + 0.5)));
  }
  return wp;
}

inline std::vector<Eigen::VectorXd> figure_eight_four() {
  return {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
}

// Lemniscate of Gerono centred at (cx, 0), sampled off the crossing so the
// self-intersection falls inside two segments.
inline std::vector<Eigen::VectorXd> gerono(int count = 12, double cx = 1.8, double a = 0.6) {
  std::vector<Eigen::VectorXd> wp;
  for (int i = 0; i < count; ++i) {
    const double t = 2 * std::numbers::pi * (i + 0.5) / count;
    wp.push_back(Eigen::Vector2d(cx + a * std::cos(t), a * std::sin(t) * std::cos(t)));
  }
  return wp;
}

inline spf::SplinePath gerono_path(int count = 12, double cx = 1.8, double a = 0.6) {
  auto path = spf::fit_spline(gerono(count, cx, a), true);
  path.set_frame_policy(spf::FramePolicy::planar2d());
  return path;
}

// Parameters (k₁, λ₁), (k₂, λ₂) of a self-intersection, refined by Newton
// from the best pair on a sample grid.
struct Crossing {
  int k1, k2;
  double l1, l2;
};

inline Crossing find_crossing(const spf::SplinePath& path, int samples = 200) {
  double best = 1e300;
  Crossing c{-1, -1, 0, 0};
  for (int k1 = 0; k1 < path.size(); ++k1) {
    for (int k2 = k1 + 2; k2 < path.size(); ++k2) {
      if (path.closed() && k1 == 0 && k2 == path.size() - 1) continue;
      const auto& s1 = path.segment(k1);
      const auto& s2 = path.segment(k2);
      for (int i = 0; i < samples; ++i) {
        for (int j = 0; j < samples; ++j) {
          const double l1 = s1.width() * i / (samples - 1), l2 = s2.width() * j / (samples - 1);
          const double d = (s1.derivative(l1, 0) - s2.derivative(l2, 0)).squaredNorm();
          if (d < best) {
            best = d;
            c = {k1, k2, l1, l2};
          }
        }
      }
    }
  }
  const auto& s1 = path.segment(c.k1);
  const auto& s2 = path.segment(c.k2);
  for (int it = 0; it < 30; ++it) {
    const Eigen::VectorXd r = s1.derivative(c.l1, 0) - s2.derivative(c.l2, 0);
    Eigen::MatrixXd jac(r.size(), 2);
    jac << s1.derivative(c.l1, 1), -s2.derivative(c.l2, 1);
    const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(r);
    c.l1 -= step(0);
    c.l2 -= step(1);
  }
  return c;
}

}  // namespace testpaths

#endif  // SPF_TEST_PATHS_HPP
