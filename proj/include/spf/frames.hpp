#ifndef SPF_FRAMES_HPP
#define SPF_FRAMES_HPP

// Generalized Frenet-Serret frames along a SplinePath, with first and second
// λ-derivatives of every frame vector.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "spf/curves.hpp"
#include "spf/detail/jet.hpp"
#include "spf/errors.hpp"
#include "spf/frame_policy.hpp"

namespace spf {

inline constexpr double kIrregularSpeed = 1e-12;
inline constexpr double kDegenerateResidual = 1e-10;

struct Frame {
  int k = 0;
  double lambda = 0.0;
  FrameMode mode = FrameMode::frenet_serret;
  MatrixXd e;    // column j is e_{j+1}
  MatrixXd de;   // d/dλ of each column
  MatrixXd dde;  // d²/dλ²
  VectorXd curvatures;  // χ_1..χ_{p-1}
  double speed = 0.0;   // ‖σ'‖
  VectorXd point;       // σ
  VectorXd d1;          // σ'
  VectorXd d2;          // σ''

  int dim() const { return static_cast<int>(e.rows()); }
};

namespace detail {

// Vector-valued second-order jet: value and two λ-derivatives.
struct VecJet {
  VectorXd v, d, dd;

  static VecJet constant(const VectorXd& x) {
    return {x, VectorXd::Zero(x.size()), VectorXd::Zero(x.size())};
  }
  VecJet& operator-=(const VecJet& o) { v -= o.v; d -= o.d; dd -= o.dd; return *this; }
};

inline Jet dot(const VecJet& a, const VecJet& b) {
  return {a.v.dot(b.v), a.d.dot(b.v) + a.v.dot(b.d), a.dd.dot(b.v) + 2.0 * a.d.dot(b.d) + a.v.dot(b.dd)};
}

inline VecJet scale(const Jet& s, const VecJet& a) {
  return {s.v * a.v, s.d * a.v + s.v * a.d, s.dd * a.v + 2.0 * s.d * a.d + s.v * a.dd};
}

inline VecJet rotate90(const VecJet& a) {
  auto r = [](const VectorXd& x) { return Eigen::Vector2d(-x(1), x(0)).eval(); };
  return {r(a.v), r(a.d), r(a.dd)};
}

inline VecJet cross(const Eigen::Vector3d& n, const VecJet& a) {
  auto c = [&n](const VectorXd& x) { return VectorXd(n.cross(Eigen::Vector3d(x))); };
  return {c(a.v), c(a.d), c(a.dd)};
}

// One Gram-Schmidt step on jets; `basis` holds already-normalized jets.
inline VecJet orthonormalize(VecJet src, const std::vector<VecJet>& basis, int j, bool check) {
  for (const auto& b : basis) src -= scale(dot(src, b), b);
  const double residual = src.v.norm();
  if (check && residual < kDegenerateResidual) {
    throw Error(ErrorCode::degenerate_frame, "Gram-Schmidt residual of e_" + std::to_string(j + 1) + " vanishes", j + 1);
  }
  if (residual == 0.0) {
    throw Error(ErrorCode::degenerate_frame, "frame completion vector is dependent", j + 1);
  }
  return scale(reciprocal(sqrt(dot(src, src))), src);
}

// Last vector of a p-frame from the other p-1 jets. Its value is fixed up to
// sign by orthogonality; the sign follows Gram-Schmidt on `direction`.
inline VecJet complete_last(const VectorXd& direction, const std::vector<VecJet>& basis, int j) {
  VectorXd v = direction;
  for (const auto& b : basis) v -= v.dot(b.v) * b.v;
  // Re-orthogonalize once; the projection is the numerically delicate part.
  for (const auto& b : basis) v -= v.dot(b.v) * b.v;
  const double residual = v.norm();
  if (residual < kDegenerateResidual) {
    throw Error(ErrorCode::degenerate_frame, "Gram-Schmidt residual of e_" + std::to_string(j + 1) + " vanishes", j + 1);
  }
  v /= residual;
  VectorXd d = VectorXd::Zero(v.size());
  VectorXd dd = VectorXd::Zero(v.size());
  for (const auto& b : basis) d -= v.dot(b.d) * b.v;
  for (const auto& b : basis) {
    dd -= (d.dot(b.d) + v.dot(b.dd)) * b.v + v.dot(b.d) * b.d;
  }
  return {v, d, dd};
}

}  // namespace detail

inline Frame frame_at(const SplinePath& path, int k, double lambda, const FramePolicy& policy) {
  const int p = path.dim();
  std::vector<VectorXd> sig(static_cast<std::size_t>(p + 2));
  for (int r = 0; r <= p + 1; ++r) sig[static_cast<std::size_t>(r)] = path.evaluate(k, lambda, r);

  Frame f;
  f.k = k;
  f.lambda = lambda;
  f.mode = policy.mode;
  f.point = sig[0];
  f.d1 = sig[1];
  f.d2 = sig[2];
  f.speed = sig[1].norm();
  if (f.speed < kIrregularSpeed) throw Error(ErrorCode::irregular_curve, "curve speed vanishes", k);

  // Only fallback frames at p = 1 reach past σ^(p+1).
  auto sigma_jet = [&](int j) -> detail::VecJet {
    const auto at = [&](int r) {
      return r <= p + 1 ? sig[static_cast<std::size_t>(r)] : path.segment(k).derivative(lambda, r);
    };
    return {at(j), at(j + 1), at(j + 2)};
  };

  std::vector<detail::VecJet> basis;
  basis.reserve(static_cast<std::size_t>(p));
  switch (policy.mode) {
    case FrameMode::frenet_serret: {
      for (int j = 0; j + 1 < p; ++j) basis.push_back(detail::orthonormalize(sigma_jet(j + 1), basis, j, true));
      basis.push_back(detail::complete_last(sig[static_cast<std::size_t>(p)], basis, p - 1));
      break;
    }
    case FrameMode::planar_fallback: {
      if (p != 2 && p != 3) throw Error(ErrorCode::parameter, "planar fallback frames need p = 2 or p = 3");
      basis.push_back(detail::orthonormalize(sigma_jet(1), {}, 0, true));
      if (p == 2) {
        basis.push_back(detail::rotate90(basis[0]));
      } else {
        if (policy.fixed_vectors.empty() || policy.fixed_vectors[0].size() != 3) {
          throw Error(ErrorCode::parameter, "planar fallback for p = 3 needs a plane normal");
        }
        const Eigen::Vector3d n = policy.fixed_vectors[0].normalized();
        if (std::abs(n.dot(Eigen::Vector3d(basis[0].v))) > 1e-8) {
          throw Error(ErrorCode::degenerate_frame, "curve leaves the fallback plane", 2);
        }
        basis.push_back(detail::cross(n, basis[0]));
        basis.push_back(detail::VecJet::constant(n));
      }
      break;
    }
    case FrameMode::line_fallback: {
      if (static_cast<int>(policy.fixed_vectors.size()) < p - 1) {
        throw Error(ErrorCode::parameter, "line fallback needs p-1 completion vectors");
      }
      basis.push_back(detail::orthonormalize(sigma_jet(1), {}, 0, true));
      for (int j = 1; j < p; ++j) {
        const auto& c = policy.fixed_vectors[static_cast<std::size_t>(j - 1)];
        if (c.size() != p) throw Error(ErrorCode::parameter, "completion vector has wrong dimension");
        basis.push_back(detail::orthonormalize(detail::VecJet::constant(c), basis, j, false));
      }
      break;
    }
  }

  f.e.resize(p, p);
  f.de.resize(p, p);
  f.dde.resize(p, p);
  for (int j = 0; j < p; ++j) {
    f.e.col(j) = basis[static_cast<std::size_t>(j)].v;
    f.de.col(j) = basis[static_cast<std::size_t>(j)].d;
    f.dde.col(j) = basis[static_cast<std::size_t>(j)].dd;
  }
  f.curvatures.resize(std::max(p - 1, 0));
  for (int i = 0; i + 1 < p; ++i) f.curvatures(i) = f.de.col(i).dot(f.e.col(i + 1)) / f.speed;
  return f;
}

inline Frame frame_at(const SplinePath& path, int k, double lambda) {
  return frame_at(path, k, lambda, path.frame_policy());
}

inline VectorXd curvatures_at(const SplinePath& path, int k, double lambda, const FramePolicy& policy) {
  return frame_at(path, k, lambda, policy).curvatures;
}

// Generalized Frenet-Serret coefficients K with e' = ‖σ'‖ E K, i.e. K(j+1, j) = χ_j and
// K(j, j+1) = -χ_j.
inline MatrixXd fs_coefficient_matrix(const VectorXd& curvatures) {
  const int p = static_cast<int>(curvatures.size()) + 1;
  MatrixXd m = MatrixXd::Zero(p, p);
  for (int j = 0; j + 1 < p; ++j) {
    m(j + 1, j) = curvatures(j);
    m(j, j + 1) = -curvatures(j);
  }
  return m;
}

// e_j' assembled from the generalized Frenet-Serret equations.
inline MatrixXd frame_derivative(const Frame& frame) {
  return frame.speed * frame.e * fs_coefficient_matrix(frame.curvatures);
}

}  // namespace spf

#endif  // SPF_FRAMES_HPP
