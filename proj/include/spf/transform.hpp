#ifndef SPF_TRANSFORM_HPP
#define SPF_TRANSFORM_HPP

// Path-adapted coordinates (η, ξ, ζ) and the input-output linearization data
// α(x), β(x) of the second derivatives of (η₁, ξ₁).

#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "spf/curves.hpp"
#include "spf/dynamics.hpp"
#include "spf/errors.hpp"
#include "spf/frames.hpp"
#include "spf/projection.hpp"

namespace spf {

inline constexpr double kJacobianRankTolerance = 1e-9;

struct TransformedState {
  double eta1 = 0.0;
  double eta2 = 0.0;
  VectorXd xi1;   // ⟨e_{j+1}, y - σ(λ*)⟩, j = 1..p-1
  VectorXd xi2;
  VectorXd zeta;  // (Φx_c, Φx_v)
  int k_star = 0;
  double lambda_star = 0.0;

  // [η₁, η₂, ξ₁¹, ξ₂¹, ..., ξ₁^{p-1}, ξ₂^{p-1}]
  VectorXd bar() const {
    VectorXd b(2 + 2 * xi1.size());
    b(0) = eta1;
    b(1) = eta2;
    for (Eigen::Index j = 0; j < xi1.size(); ++j) {
      b(2 + 2 * j) = xi1(j);
      b(3 + 2 * j) = xi2(j);
    }
    return b;
  }
  // Transversal state stacked per channel, as fed to the transversal law.
  VectorXd xi() const {
    VectorXd x(2 * xi1.size());
    for (Eigen::Index j = 0; j < xi1.size(); ++j) {
      x(2 * j) = xi1(j);
      x(2 * j + 1) = xi2(j);
    }
    return x;
  }
};

struct LinearizationData {
  VectorXd alpha;  // [L_f²η₁, L_f²ξ₁¹, ...]
  MatrixXd beta;   // rows L_gL_fη₁, L_gL_fξ₁ʲ
  Frame frame;
  MatrixXd differentials;  // filled on request, 2p × 2N
  double beta_condition = 0.0;
};

struct ArclengthResult {
  double s = 0.0;       // s_k(λ)
  double offset = 0.0;  // Σ_{i<k} s_i(λ_i,max)
  double eta1() const { return offset + s; }
};

inline ArclengthResult arclength(const SplinePath& path, int k, double lambda) {
  const auto& seg = path.segment(k);
  if (!seg.contains(lambda)) throw Error(ErrorCode::domain, "lambda outside segment domain", k);
  return {segment_arclength(seg, lambda), path.arclength_offset(k)};
}

namespace detail {

inline void require_full_rank(const MatrixXd& j) {
  Eigen::JacobiSVD<MatrixXd> svd(j);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= kJacobianRankTolerance * s(0)) {
    throw Error(ErrorCode::singularity, "output Jacobian is rank deficient");
  }
}

// Quantities shared by the state map and its derivatives at one state.
struct Kinematics {
  VectorXd y, d, w;  // h(x), h - σ(λ*), J x_v
  MatrixXd jac;
};

inline Kinematics kinematics(const MechanicalSystem& sys, const State& x, const Frame& f) {
  Kinematics k;
  k.y = sys.output(x.xc);
  k.jac = sys.jacobian(x.xc);
  k.d = k.y - f.point;
  k.w = k.jac * x.xv;
  return k;
}

}  // namespace detail

inline TransformedState to_transformed(const MechanicalSystem& sys, const SplinePath& path, const State& x,
                                       const ProjectionState& proj, const Frame& f) {
  const int p = path.dim();
  if (sys.output_dim() != p) throw Error(ErrorCode::invalid_config, "plant output dimension differs from path dimension");
  const auto kin = detail::kinematics(sys, x, f);
  detail::require_full_rank(kin.jac);
  TransformedState t;
  t.k_star = proj.k_star;
  t.lambda_star = proj.lambda_star;
  t.eta1 = arclength(path, proj.k_star, proj.lambda_star).eta1();
  t.eta2 = f.e.col(0).dot(kin.w);
  const double mu = t.eta2 / f.speed;
  t.xi1.resize(p - 1);
  t.xi2.resize(p - 1);
  for (int j = 1; j < p; ++j) {
    t.xi1(j - 1) = f.e.col(j).dot(kin.d);
    t.xi2(j - 1) = mu * f.de.col(j).dot(kin.d) + f.e.col(j).dot(kin.w);
  }
  t.zeta = completion_state(sys, x);
  return t;
}

inline TransformedState to_transformed(const MechanicalSystem& sys, const SplinePath& path, const State& x,
                                       const ProjectionState& proj) {
  return to_transformed(sys, path, x, proj, frame_at(path, proj.k_star, proj.lambda_star));
}

// 2p × 2N differential of (η₁, η₂, ξ₁¹, ξ₂¹, ...). Position blocks of η₂ and
// ξ₂ are directional derivatives of the state maps, with λ* moving at
// ⟨σ', J δq⟩ / ‖σ'‖² as in the η₂ construction.
inline MatrixXd state_differentials(const MechanicalSystem& sys, const State& x, const Frame& f) {
  const int p = f.dim();
  const int n = sys.dof();
  const auto kin = detail::kinematics(sys, x, f);
  const double s = f.speed;
  const double s2 = s * s;
  const double eta2 = f.e.col(0).dot(kin.w);
  const double mu = eta2 / s;
  const double sp_spp = f.d1.dot(f.d2);

  MatrixXd m = MatrixXd::Zero(2 * p, 2 * n);
  const Eigen::RowVectorXd e1j = f.e.col(0).transpose() * kin.jac;
  m.block(0, 0, 1, n) = e1j;
  m.block(1, n, 1, n) = e1j;
  for (int j = 1; j < p; ++j) {
    const double a = kin.d.dot(f.de.col(j)) / s;
    const Eigen::RowVectorXd row = (a * f.e.col(0).transpose() + f.e.col(j).transpose()) * kin.jac;
    m.block(2 * j, 0, 1, n) = row;
    m.block(2 * j + 1, n, 1, n) = row;
  }
  for (int c = 0; c < n; ++c) {
    const VectorXd dq = VectorXd::Unit(n, c);
    const VectorXd dy = kin.jac.col(c);
    const double dl = f.d1.dot(dy) / s2;
    const VectorXd mixed = 0.25 * (sys.jacobian_rate_contraction(x.xc, x.xv + dq) -
                                   sys.jacobian_rate_contraction(x.xc, x.xv - dq));
    const double deta2 = f.de.col(0).dot(kin.w) * dl + f.e.col(0).dot(mixed);
    m(1, c) = deta2;
    const double dmu = deta2 / s - eta2 * sp_spp * dl / (s2 * s);
    for (int j = 1; j < p; ++j) {
      const double g = f.de.col(j).dot(kin.d);
      const double dg = f.dde.col(j).dot(kin.d) * dl + f.de.col(j).dot(dy - f.d1 * dl);
      const double dh = f.de.col(j).dot(kin.w) * dl + f.e.col(j).dot(mixed);
      m(2 * j + 1, c) = dmu * g + mu * dg + dh;
    }
  }
  return m;
}

inline LinearizationData linearize(const MechanicalSystem& sys, const SplinePath& path, const State& x,
                                   [[maybe_unused]] const ProjectionState& proj, const Frame& f,
                                   bool with_differentials = false) {
  const int p = path.dim();
  if (sys.output_dim() != p) throw Error(ErrorCode::invalid_config, "plant output dimension differs from path dimension");
  const auto kin = detail::kinematics(sys, x, f);
  detail::require_full_rank(kin.jac);
  const auto fg = drift_and_input(sys, x);
  const VectorXd a = sys.jacobian_rate_contraction(x.xc, x.xv) + kin.jac * fg.f_v;
  const MatrixXd jg = kin.jac * fg.g_v;

  const double s = f.speed;
  const double eta2 = f.e.col(0).dot(kin.w);
  const double mu = eta2 / s;
  const double sp_spp = f.d1.dot(f.d2);

  LinearizationData lin;
  lin.frame = f;
  lin.alpha.resize(p);
  lin.beta.resize(p, sys.dof());
  const double lf2_eta = mu * f.de.col(0).dot(kin.w) + f.e.col(0).dot(a);
  const Eigen::RowVectorXd lglf_eta = f.e.col(0).transpose() * jg;
  lin.alpha(0) = lf2_eta;
  lin.beta.row(0) = lglf_eta;
  // The λ*-rate term multiplying e_j' uses the drift part of η̇₂ (L_f²η₁);
  // its input part lands in β.
  const double mu_dot_drift = lf2_eta / s - eta2 * eta2 * sp_spp / (s * s * s * s);
  for (int j = 1; j < p; ++j) {
    const VectorXd ej = f.e.col(j);
    const VectorXd dej = f.de.col(j);
    const VectorXd ddej = f.dde.col(j);
    lin.alpha(j) = ej.dot(a) + mu * dej.dot(2.0 * kin.w - f.e.col(0) * eta2) +
                   kin.d.dot(ddej * mu * mu + dej * mu_dot_drift);
    lin.beta.row(j) = ej.transpose() * jg + kin.d.dot(dej) / s * lglf_eta;
  }
  Eigen::JacobiSVD<MatrixXd> svd(lin.beta);
  const auto& sv = svd.singularValues();
  lin.beta_condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (with_differentials) lin.differentials = state_differentials(sys, x, f);
  return lin;
}

inline LinearizationData linearize(const MechanicalSystem& sys, const SplinePath& path, const State& x,
                                   const ProjectionState& proj) {
  return linearize(sys, path, x, proj, frame_at(path, proj.k_star, proj.lambda_star));
}

struct DifferentialReport {
  MatrixXd matrix;
  VectorXd singular_values;
  double sigma_min = 0.0;
  int rank = 0;
  bool full_rank = false;
};

inline DifferentialReport check_differentials(const MechanicalSystem& sys, const SplinePath& path, const State& x,
                                              const ProjectionState& proj, double rank_tolerance = 1e-8) {
  const Frame f = frame_at(path, proj.k_star, proj.lambda_star);
  DifferentialReport r;
  r.matrix = state_differentials(sys, x, f);
  Eigen::JacobiSVD<MatrixXd> svd(r.matrix);
  r.singular_values = svd.singularValues();
  r.sigma_min = r.singular_values(r.singular_values.size() - 1);
  r.rank = 0;
  for (Eigen::Index i = 0; i < r.singular_values.size(); ++i) r.rank += r.singular_values(i) > rank_tolerance ? 1 : 0;
  r.full_rank = r.rank == r.matrix.rows();
  return r;
}

}  // namespace spf

#endif  // SPF_TRANSFORM_HPP
