#ifndef SPF_PROJECTION_HPP
#define SPF_PROJECTION_HPP

// Closest-point tracking on a SplinePath: brute-force initialization, then a
// monotone adaptive-step descent per control step with segment switching.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "spf/curves.hpp"
#include "spf/errors.hpp"

namespace spf {

struct ProjectionState {
  int k_star = 0;
  double lambda_star = 0.0;
  double step_size = 1e-3;
  int last_iterations = 0;
  bool clamped = false;  // open-path end reached
};

struct ProjectionConfig {
  double epsilon = 1e-8;
  double alpha0 = 1e-3;
  double grow = 1.2;
  double shrink = 0.5;
  int max_iters = 200;
  double init_quantization = 0.0;  // arclength spacing; 0 selects total length / 2000

  void validate() const {
    if (!(epsilon > 0.0)) throw Error(ErrorCode::invalid_config, "projection epsilon must be positive");
    if (!(alpha0 > 0.0)) throw Error(ErrorCode::invalid_config, "projection alpha0 must be positive");
    if (!(shrink > 0.0 && shrink < 1.0 && grow > 1.0)) {
      throw Error(ErrorCode::invalid_config, "projection step factors need 0 < shrink < 1 < grow");
    }
    if (max_iters < 1) throw Error(ErrorCode::invalid_config, "projection max_iters must be positive");
    if (init_quantization < 0.0) throw Error(ErrorCode::invalid_config, "init_quantization must be non-negative");
  }
};

class ProjectionError : public Error {
 public:
  ProjectionError(const std::string& what, ProjectionState best)
      : Error(ErrorCode::non_convergence, what, best.k_star), best_(best) {}
  const ProjectionState& best() const noexcept { return best_; }

 private:
  ProjectionState best_;
};

// Initial descent step in parameter units from an expected output speed.
inline double suggest_initial_step(const SplinePath& path, double eta2_ref, double dt, int samples = 64) {
  double min_speed = std::numeric_limits<double>::infinity();
  for (int k = 0; k < path.size(); ++k) {
    const auto& seg = path.segment(k);
    for (int i = 0; i < samples; ++i) {
      const double l = seg.lambda_min() + seg.width() * i / (samples - 1);
      min_speed = std::min(min_speed, seg.derivative(l, 1).norm());
    }
  }
  if (!(min_speed > 0.0)) throw Error(ErrorCode::irregular_curve, "path speed vanishes");
  return std::abs(eta2_ref) * dt / min_speed;
}

namespace detail {

inline double squared_distance(const CurveSegment& seg, const VectorXd& y, double lambda) {
  return (y - seg.derivative(lambda, 0)).squaredNorm();
}

// Descent on one segment's (extrapolated) polynomial. Returns iterations used.
// The distance and its square share minimizers and step directions, so the
// square is compared throughout; it stays smooth on the path itself.
inline int descend(const CurveSegment& seg, const VectorXd& y, double& lambda, double& alpha,
                   const ProjectionConfig& cfg, int budget) {
  double f = squared_distance(seg, y, lambda);
  int iters = 0;
  while (true) {
    if (iters >= budget) return -1;
    ++iters;
    const VectorXd d = y - seg.derivative(lambda, 0);
    const VectorXd s1 = seg.derivative(lambda, 1);
    const double speed2 = s1.squaredNorm();
    const double g = -d.dot(s1);  // half the gradient of ‖y - σ‖²
    const double curvature = speed2 - d.dot(seg.derivative(lambda, 2));
    // Stationary once the Newton correction g / curvature is below ε (the
    // speed floor keeps this meaningful where the curvature is small).
    if (std::abs(g) <= cfg.epsilon * std::max(speed2, curvature)) {
      if (curvature > 0.0) return iters;
      // Stationary but not a minimum: nudge off the ridge.
      lambda += cfg.epsilon;
      f = squared_distance(seg, y, lambda);
      continue;
    }
    const double direction = g > 0.0 ? -1.0 : 1.0;
    // Inner loop: shrink until a strictly better point is found or α < ε.
    while (true) {
      const double candidate = lambda + direction * alpha;
      const double fc = squared_distance(seg, y, candidate);
      if (fc < f) {
        lambda = candidate;
        f = fc;
        alpha *= cfg.grow;
        break;
      }
      alpha *= cfg.shrink;
      if (alpha < cfg.epsilon) {
        alpha = cfg.epsilon;
        return iters;
      }
      if (++iters >= budget) return -1;
    }
  }
}

}  // namespace detail

// One tracking step. λ* may leave 𝕀_{k*} during descent; afterwards k* moves
// to the neighbouring segment with the overshoot carried over and descent
// restarts there.
inline ProjectionState update(const ProjectionState& state, const SplinePath& path, const VectorXd& y,
                              const ProjectionConfig& cfg) {
  ProjectionState s = state;
  s.clamped = false;
  s.step_size = cfg.alpha0;
  int k = s.k_star;
  double lambda = std::clamp(s.lambda_star, path.segment(k).lambda_min(), path.segment(k).lambda_max());
  int total = 0;
  int came_from = -1;
  const int max_switches = path.size() + 2;
  for (int switches = 0;; ++switches) {
    const auto& seg = path.segment(k);
    const int used = detail::descend(seg, y, lambda, s.step_size, cfg, cfg.max_iters - total);
    if (used < 0) {
      s.k_star = k;
      s.lambda_star = std::clamp(lambda, seg.lambda_min(), seg.lambda_max());
      s.last_iterations = cfg.max_iters;
      throw ProjectionError("projection exceeded " + std::to_string(cfg.max_iters) + " iterations", s);
    }
    total += used;
    int target = -1;
    double carried = 0.0;
    bool at_end = false;
    if (lambda > seg.lambda_max()) {
      target = path.next(k);
      if (target >= 0) carried = path.segment(target).lambda_min() + (lambda - seg.lambda_max());
      at_end = true;
    } else if (lambda < seg.lambda_min()) {
      target = path.prev(k);
      if (target >= 0) carried = path.segment(target).lambda_max() - (seg.lambda_min() - lambda);
      at_end = true;
    }
    if (!at_end) break;
    if (target < 0) {
      lambda = std::clamp(lambda, seg.lambda_min(), seg.lambda_max());
      s.clamped = true;
      break;
    }
    if (target == came_from || switches >= max_switches) {
      // The minimizer sits on the junction itself: stay on this side of it.
      lambda = std::clamp(lambda, seg.lambda_min(), seg.lambda_max());
      break;
    }
    came_from = k;
    k = target;
    lambda = std::clamp(carried, path.segment(k).lambda_min(), path.segment(k).lambda_max());
  }
  s.k_star = k;
  s.lambda_star = lambda;
  s.last_iterations = total;
  return s;
}

inline ProjectionState global_initialize(const SplinePath& path, const VectorXd& y, const ProjectionConfig& cfg) {
  const double q = cfg.init_quantization > 0.0 ? cfg.init_quantization : path.total_length() / 2000.0;
  int best_k = 0;
  double best_lambda = path.segment(0).lambda_min();
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < path.size(); ++k) {
    const auto& seg = path.segment(k);
    const int n = std::max(2, static_cast<int>(std::ceil(path.segment_length(k) / q)) + 1);
    for (int i = 0; i < n; ++i) {
      const double l = seg.lambda_min() + seg.width() * i / (n - 1);
      const double d = detail::squared_distance(seg, y, l);
      // Strictly better beyond round-off, so ties keep the smallest (k, λ).
      if (std::isinf(best) || d < best - 1e-12 * std::max(1.0, best)) {
        best = d;
        best_k = k;
        best_lambda = l;
      }
    }
  }
  ProjectionState s;
  s.k_star = best_k;
  s.lambda_star = best_lambda;
  s.step_size = cfg.alpha0;
  return update(s, path, y, cfg);
}

// ---------------------------------------------------------------------------
// Allowable per-step parameter change

// Left side of the convexity inequality minus its right side; negative where
// ‖σ(λ*) - σ(λ)‖ is locally convex in λ.
inline double convexity_margin(const CurveSegment& seg, double lambda_star, double lambda) {
  const VectorXd d = seg.derivative(lambda_star, 0) - seg.derivative(lambda, 0);
  const VectorXd s1 = seg.derivative(lambda, 1);
  const VectorXd s2 = seg.derivative(lambda, 2);
  const double dn2 = d.squaredNorm();
  const double ratio = dn2 > 0.0 ? d.dot(s1) * d.dot(s1) / dn2 : s1.squaredNorm();
  return d.dot(s2) + ratio - s1.squaredNorm();
}

struct DeltaLambdaTable {
  int k = 0;
  std::vector<double> lambda_star;
  std::vector<double> delta;
  double minimum = 0.0;
};

namespace detail {

inline bool convex_at(const CurveSegment& seg, double lambda_star, double lambda) {
  // The inequality is strict in exact arithmetic; a relative slack keeps the
  // straight line (where it holds with equality in floating point) admissible.
  const double speed2 = seg.derivative(lambda, 1).squaredNorm();
  return convexity_margin(seg, lambda_star, lambda) <= 1e-10 * speed2;
}

// Distance from λ* to the first violation in `direction`, or +inf if the
// segment end is reached without one.
inline double first_violation(const CurveSegment& seg, double lambda_star, double direction, int scan) {
  const double end = direction > 0 ? seg.lambda_max() : seg.lambda_min();
  const double reach = std::abs(end - lambda_star);
  if (reach <= 0.0) return std::numeric_limits<double>::infinity();
  const double h = seg.width() / scan;
  double good = 0.0;
  for (double t = std::min(h, reach);; t = std::min(t + h, reach)) {
    if (!convex_at(seg, lambda_star, lambda_star + direction * t)) {
      double lo = good, hi = t;
      for (int i = 0; i < 60 && hi - lo > 1e-13 * (1.0 + hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        (convex_at(seg, lambda_star, lambda_star + direction * mid) ? lo : hi) = mid;
      }
      return lo;
    }
    good = t;
    if (t >= reach) break;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Largest Δλ with the convexity inequality holding on [λ*-Δλ, λ*+Δλ] ∩ 𝕀_k.
inline double allowable_delta_lambda_at(const SplinePath& path, int k, double lambda_star, int scan = 4000) {
  const auto& seg = path.segment(k);
  if (!seg.contains(lambda_star)) throw Error(ErrorCode::domain, "lambda* outside segment domain", k);
  const double right = detail::first_violation(seg, lambda_star, 1.0, scan);
  const double left = detail::first_violation(seg, lambda_star, -1.0, scan);
  const double d = std::min(left, right);
  return std::isinf(d) ? seg.width() : d;
}

inline DeltaLambdaTable allowable_delta_lambda(const SplinePath& path, int k, int samples, int scan = 4000) {
  if (samples < 1) throw Error(ErrorCode::parameter, "need at least one sample");
  const auto& seg = path.segment(k);
  DeltaLambdaTable t;
  t.k = k;
  t.minimum = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const double l = samples == 1 ? seg.lambda_min() : seg.lambda_min() + seg.width() * i / (samples - 1);
    const double d = allowable_delta_lambda_at(path, k, l, scan);
    t.lambda_star.push_back(l);
    t.delta.push_back(d);
    t.minimum = std::min(t.minimum, d);
  }
  return t;
}

inline double path_delta_lambda(const SplinePath& path, int samples, int scan = 4000) {
  double m = std::numeric_limits<double>::infinity();
  for (int k = 0; k < path.size(); ++k) m = std::min(m, allowable_delta_lambda(path, k, samples, scan).minimum);
  return m;
}

}  // namespace spf

#endif  // SPF_PROJECTION_HPP
