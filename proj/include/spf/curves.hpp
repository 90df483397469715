#ifndef SPF_CURVES_HPP
#define SPF_CURVES_HPP

// Composite parametrized paths: polynomial segments fitted through waypoints
// and closed-form segments (ellipse, circle, helix) behind one interface.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spf/errors.hpp"
#include "spf/frame_policy.hpp"

namespace spf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One curve σ_k on its closed domain [λ_min, λ_max].
//
// Polynomial segments store coefficients column-wise: column i holds the
// per-dimension coefficient of λ^i. Analytic segments evaluate a callback
// returning d^order σ / dλ^order.
class CurveSegment {
 public:
  using DerivativeFn = std::function<VectorXd(double lambda, int order)>;

  static CurveSegment polynomial(MatrixXd coefficients, double lambda_min, double lambda_max) {
    CurveSegment seg(static_cast<int>(coefficients.rows()), lambda_min, lambda_max);
    if (coefficients.cols() < 1) throw Error(ErrorCode::parameter, "polynomial segment needs coefficients");
    seg.coefficients_ = std::move(coefficients);
    return seg;
  }

  static CurveSegment analytic(int dim, DerivativeFn fn, double lambda_min, double lambda_max) {
    CurveSegment seg(dim, lambda_min, lambda_max);
    seg.fn_ = std::move(fn);
    return seg;
  }

  int dim() const { return dim_; }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }
  double width() const { return lambda_max_ - lambda_min_; }
  bool contains(double lambda) const { return lambda >= lambda_min_ && lambda <= lambda_max_; }
  bool is_polynomial() const { return !fn_; }
  const MatrixXd& coefficients() const { return coefficients_; }
  int degree() const { return static_cast<int>(coefficients_.cols()) - 1; }

  // Unchecked evaluation; polynomials and closed forms extrapolate outside
  // the domain. Callers that must respect 𝕀_k go through SplinePath::evaluate.
  VectorXd derivative(double lambda, int order) const {
    if (fn_) return fn_(lambda, order);
    const int n = static_cast<int>(coefficients_.cols());
    VectorXd acc = VectorXd::Zero(dim_);
    if (order >= n) return acc;
    // Horner on the differentiated coefficients.
    for (int i = n - 1; i >= order; --i) {
      double falling = 1.0;
      for (int r = 0; r < order; ++r) falling *= static_cast<double>(i - r);
      acc = acc * lambda + coefficients_.col(i) * falling;
    }
    return acc;
  }

 private:
  CurveSegment(int dim, double lambda_min, double lambda_max)
      : dim_(dim), lambda_min_(lambda_min), lambda_max_(lambda_max) {
    if (dim < 1) throw Error(ErrorCode::parameter, "curve dimension must be positive");
    if (!(lambda_min < lambda_max)) throw Error(ErrorCode::parameter, "segment domain must satisfy lambda_min < lambda_max");
  }

  int dim_;
  double lambda_min_;
  double lambda_max_;
  MatrixXd coefficients_;
  DerivativeFn fn_;
};

// s_k(λ) = ∫_{λ_min}^{λ} ‖σ_k'‖ dλ by adaptive Gauss-Kronrod.
inline double segment_arclength(const CurveSegment& seg, double lambda) {
  if (lambda == seg.lambda_min()) return 0.0;
  // Integrated over t ∈ [0, 1]: the library compares its reference-interval
  // error against a tolerance scaled by the interval width, so short
  // intervals would otherwise always recurse to max depth.
  const double w = lambda - seg.lambda_min();
  auto speed = [&seg, w](double t) { return w * seg.derivative(seg.lambda_min() + t * w, 1).norm(); };
  double error = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 21>::integrate(speed, 0.0, 1.0, 20, 1e-13, &error);
}

// Ordered segments σ_1..σ_ηs forming the desired path, with the per-segment
// arclength table computed once at construction.
class SplinePath {
 public:
  SplinePath(std::vector<CurveSegment> segments, bool closed, FramePolicy policy = {})
      : segments_(std::move(segments)), closed_(closed), policy_(std::move(policy)) {
    if (segments_.empty()) throw Error(ErrorCode::parameter, "path needs at least one segment");
    dim_ = segments_.front().dim();
    lengths_.reserve(segments_.size());
    cumulative_.reserve(segments_.size());
    double total = 0.0;
    for (const auto& seg : segments_) {
      if (seg.dim() != dim_) throw Error(ErrorCode::parameter, "segments disagree on output dimension");
      const double len = segment_arclength(seg, seg.lambda_max());
      lengths_.push_back(len);
      total += len;
      cumulative_.push_back(total);
    }
  }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(segments_.size()); }
  bool closed() const { return closed_; }
  int max_order() const { return dim_ + 1; }
  const CurveSegment& segment(int k) const { return segments_.at(static_cast<std::size_t>(k)); }
  const std::vector<CurveSegment>& segments() const { return segments_; }

  const FramePolicy& frame_policy() const { return policy_; }
  void set_frame_policy(FramePolicy policy) { policy_ = std::move(policy); }

  // s_k(λ_k,max) for segment k.
  double segment_length(int k) const { return lengths_.at(static_cast<std::size_t>(k)); }
  // Σ_{i≤k} s_i(λ_i,max).
  const std::vector<double>& cumulative_arclength() const { return cumulative_; }
  // Σ_{i<k} s_i(λ_i,max): the η₁ offset of segment k.
  double arclength_offset(int k) const { return k == 0 ? 0.0 : cumulative_.at(static_cast<std::size_t>(k - 1)); }
  double total_length() const { return cumulative_.back(); }

  VectorXd evaluate(int k, double lambda, int order) const {
    if (k < 0 || k >= size()) throw Error(ErrorCode::domain, "segment index out of range", k);
    const auto& seg = segment(k);
    if (!seg.contains(lambda)) {
      throw Error(ErrorCode::domain,
                  "lambda " + std::to_string(lambda) + " outside [" + std::to_string(seg.lambda_min()) + ", " +
                      std::to_string(seg.lambda_max()) + "]",
                  k);
    }
    if (order < 0 || order > max_order()) {
      throw Error(ErrorCode::unsupported_order, "derivative order " + std::to_string(order) + " exceeds p+1");
    }
    return seg.derivative(lambda, order);
  }

  // Index of the segment after/before k, honouring closed-path wraparound;
  // -1 when an open path has no neighbour.
  int next(int k) const { return k + 1 < size() ? k + 1 : (closed_ ? 0 : -1); }
  int prev(int k) const { return k > 0 ? k - 1 : (closed_ ? size() - 1 : -1); }

 private:
  std::vector<CurveSegment> segments_;
  bool closed_;
  FramePolicy policy_;
  int dim_ = 0;
  std::vector<double> lengths_;
  std::vector<double> cumulative_;
};

// ---------------------------------------------------------------------------
// Spline fitting

// Polynomial degree used for a requested junction smoothness: the smallest odd
// degree d with C^{d-1} ⊇ C^smoothness, so open paths split their d-1 free end
// conditions evenly.
inline int spline_degree(int smoothness_order) {
  if (smoothness_order < 0) throw Error(ErrorCode::parameter, "smoothness order must be non-negative");
  if (smoothness_order == 0) return 1;
  return smoothness_order % 2 == 0 ? smoothness_order + 1 : smoothness_order + 2;
}

namespace detail {

inline double falling_factorial(int i, int r) {
  double f = 1.0;
  for (int j = 0; j < r; ++j) f *= static_cast<double>(i - j);
  return f;
}

}  // namespace detail

// Interpolating spline through waypoints with chord-length domains [0, l_k].
// Junctions are C^{d-1} (d from spline_degree). Open ends set derivatives of
// order 2..(d+1)/2 to zero. smoothness_order < 0 selects p+1.
inline SplinePath fit_spline(const std::vector<VectorXd>& waypoints, bool closed, int smoothness_order = -1) {
  const int count = static_cast<int>(waypoints.size());
  if (count < 2 || (closed && count < 3)) {
    throw Error(ErrorCode::parameter, closed ? "closed path needs at least 3 waypoints" : "path needs at least 2 waypoints");
  }
  const int p = static_cast<int>(waypoints.front().size());
  for (const auto& w : waypoints) {
    if (w.size() != p) throw Error(ErrorCode::parameter, "waypoints disagree on dimension");
  }
  if (smoothness_order < 0) smoothness_order = p + 1;
  const int d = spline_degree(smoothness_order);
  const int nc = d + 1;
  const int ns = closed ? count : count - 1;

  std::vector<double> chord(static_cast<std::size_t>(ns));
  for (int k = 0; k < ns; ++k) {
    const double l = (waypoints[static_cast<std::size_t>((k + 1) % count)] - waypoints[static_cast<std::size_t>(k)]).norm();
    if (!(l > 0.0)) throw Error(ErrorCode::degenerate_chord, "consecutive waypoints coincide", k);
    chord[static_cast<std::size_t>(k)] = l;
  }

  // Unknowns are normalized coefficients c_{k,i} of t^i, t = λ / l_k.
  const int n = ns * nc;
  MatrixXd a = MatrixXd::Zero(n, n);
  MatrixXd rhs = MatrixXd::Zero(n, p);
  int row = 0;
  auto col = [nc](int k, int i) { return k * nc + i; };
  for (int k = 0; k < ns; ++k) {
    a(row, col(k, 0)) = 1.0;
    rhs.row(row++) = waypoints[static_cast<std::size_t>(k)].transpose();
    for (int i = 0; i < nc; ++i) a(row, col(k, i)) = 1.0;
    rhs.row(row++) = waypoints[static_cast<std::size_t>((k + 1) % count)].transpose();
  }
  const int junctions = closed ? ns : ns - 1;
  for (int k = 0; k < junctions; ++k) {
    const int kn = (k + 1) % ns;
    const double ratio = chord[static_cast<std::size_t>(k)] / chord[static_cast<std::size_t>(kn)];
    for (int r = 1; r <= d - 1; ++r) {
      for (int i = r; i < nc; ++i) a(row, col(k, i)) = detail::falling_factorial(i, r);
      a(row, col(kn, r)) -= std::pow(ratio, r) * detail::falling_factorial(r, r);
      ++row;
    }
  }
  if (!closed) {
    for (int r = 2; r <= (d + 1) / 2; ++r) {
      a(row++, col(0, r)) = 1.0;
      for (int i = r; i < nc; ++i) a(row, col(ns - 1, i)) = detail::falling_factorial(i, r);
      ++row;
    }
  }
  if (row != n) throw Error(ErrorCode::fit_failure, "internal: equation count mismatch");

  Eigen::FullPivLU<MatrixXd> lu(a);
  lu.setThreshold(1e-13);
  if (lu.rank() < n) {
    const MatrixXd kernel = lu.kernel();
    Eigen::Index worst = 0;
    kernel.col(0).cwiseAbs().maxCoeff(&worst);
    throw Error(ErrorCode::fit_failure, "spline system is rank deficient", static_cast<int>(worst) / nc);
  }
  const MatrixXd c = lu.solve(rhs);

  std::vector<CurveSegment> segments;
  segments.reserve(static_cast<std::size_t>(ns));
  for (int k = 0; k < ns; ++k) {
    const double l = chord[static_cast<std::size_t>(k)];
    MatrixXd coeffs(p, nc);
    double scale = 1.0;
    for (int i = 0; i < nc; ++i) {
      coeffs.col(i) = c.block(col(k, i), 0, 1, p).transpose() / scale;
      scale *= l;
    }
    coeffs.col(0) = waypoints[static_cast<std::size_t>(k)];
    segments.push_back(CurveSegment::polynomial(std::move(coeffs), 0.0, l));
  }
  return SplinePath(std::move(segments), closed);
}

// ---------------------------------------------------------------------------
// Closed-form segments

// (center + a cos λ, b sin λ).
inline CurveSegment ellipse_segment(double a, double b, double lambda_min, double lambda_max,
                                    Eigen::Vector2d center = Eigen::Vector2d::Zero()) {
  auto fn = [a, b, center](double l, int order) -> VectorXd {
    // d^r cos = cos(λ + rπ/2), d^r sin = sin(λ + rπ/2)
    const double shift = order * std::numbers::pi / 2.0;
    Eigen::Vector2d out(a * std::cos(l + shift), b * std::sin(l + shift));
    if (order == 0) out += center;
    return out;
  };
  return CurveSegment::analytic(2, fn, lambda_min, lambda_max);
}

inline CurveSegment circle_segment(double radius, double lambda_min, double lambda_max,
                                   Eigen::Vector2d center = Eigen::Vector2d::Zero()) {
  return ellipse_segment(radius, radius, lambda_min, lambda_max, center);
}

// (r cos λ, r sin λ, pitch·λ).
inline CurveSegment helix_segment(double radius, double pitch, double lambda_min, double lambda_max) {
  auto fn = [radius, pitch](double l, int order) -> VectorXd {
    const double shift = order * std::numbers::pi / 2.0;
    Eigen::Vector3d out(radius * std::cos(l + shift), radius * std::sin(l + shift), 0.0);
    if (order == 0) out.z() = pitch * l;
    if (order == 1) out.z() = pitch;
    return out;
  };
  return CurveSegment::analytic(3, fn, lambda_min, lambda_max);
}

// start + λ·direction as a degree-1 polynomial.
inline CurveSegment line_segment(const VectorXd& start, const VectorXd& direction, double lambda_min, double lambda_max) {
  MatrixXd coeffs(start.size(), 2);
  coeffs.col(0) = start;
  coeffs.col(1) = direction;
  return CurveSegment::polynomial(std::move(coeffs), lambda_min, lambda_max);
}

// ---------------------------------------------------------------------------
// Assumption checks (sampling, not proof)

struct AssumptionReport {
  bool smooth_ok = true;
  bool framed_ok = true;
  double worst_junction_error = 0.0;
  int worst_junction = -1;
  int worst_junction_order = -1;
  // Gram determinant of {σ', ..., σ^(p)} normalized by Π‖σ^(j)‖², minimum over the grid.
  double min_gram_determinant = 1.0;
  int worst_segment = -1;
  double worst_lambda = 0.0;
};

inline constexpr double kJunctionTolerance = 1e-8;
inline constexpr double kGramThreshold = 1e-10;

inline AssumptionReport check_assumptions(const SplinePath& path, int grid_density = 64) {
  if (grid_density < 2) throw Error(ErrorCode::parameter, "grid density must be at least 2");
  AssumptionReport report;
  const int p = path.dim();
  const int junctions = path.closed() ? path.size() : path.size() - 1;
  for (int k = 0; k < junctions; ++k) {
    const int kn = path.next(k);
    const auto& a = path.segment(k);
    const auto& b = path.segment(kn);
    for (int order = 0; order <= p + 1; ++order) {
      const VectorXd left = a.derivative(a.lambda_max(), order);
      const VectorXd right = b.derivative(b.lambda_min(), order);
      const double err = (left - right).norm() / (1.0 + left.norm());
      if (err > report.worst_junction_error) {
        report.worst_junction_error = err;
        report.worst_junction = k;
        report.worst_junction_order = order;
      }
    }
  }
  report.smooth_ok = report.worst_junction_error < kJunctionTolerance;

  for (int k = 0; k < path.size(); ++k) {
    const auto& seg = path.segment(k);
    for (int i = 0; i < grid_density; ++i) {
      const double l = seg.lambda_min() + seg.width() * i / (grid_density - 1);
      MatrixXd g(p, p);
      double norms = 1.0;
      for (int j = 0; j < p; ++j) {
        g.col(j) = seg.derivative(l, j + 1);
        norms *= g.col(j).squaredNorm();
      }
      const double det = norms > 0.0 ? (g.transpose() * g).determinant() / norms : 0.0;
      if (det < report.min_gram_determinant) {
        report.min_gram_determinant = det;
        report.worst_segment = k;
        report.worst_lambda = l;
      }
    }
  }
  report.framed_ok = report.min_gram_determinant > kGramThreshold;
  return report;
}

}  // namespace spf

#endif  // SPF_CURVES_HPP
