#ifndef SPF_CONTROL_HPP
#define SPF_CONTROL_HPP

// Outer loops on (η, ξ), the feedback transform v = βu + α and the weighted
// redundancy resolution that picks u among all solutions.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spf/curves.hpp"
#include "spf/dynamics.hpp"
#include "spf/errors.hpp"
#include "spf/frames.hpp"
#include "spf/projection.hpp"
#include "spf/transform.hpp"

namespace spf {

inline constexpr double kDecouplingConditionLimit = 1e10;

// Affine joint-position-to-input map: u_max at x_min, u_min at x_max.
inline VectorXd bias_r(const VectorXd& xc, const Limits& limits) {
  const VectorXd slope = (limits.u_max - limits.u_min).cwiseQuotient(limits.xc_max - limits.xc_min);
  return (-slope.cwiseProduct(xc - limits.xc_min) + limits.u_max).eval();
}

// u = β†(v - α) + (I - β†β) r with β† = W⁻¹βᵀ(βW⁻¹βᵀ)⁻¹.
inline VectorXd resolve_input(const VectorXd& alpha, const MatrixXd& beta, const VectorXd& v, const VectorXd& r,
                              const MatrixXd& w) {
  const Eigen::LLT<MatrixXd> wl(w);
  if (wl.info() != Eigen::Success) throw Error(ErrorCode::invalid_config, "weighting matrix W is not positive definite");
  const MatrixXd winv_bt = wl.solve(beta.transpose());
  const MatrixXd m = beta * winv_bt;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double cond = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= kDecouplingConditionLimit)) {
    throw Error(ErrorCode::near_singular_decoupling, "condition number of beta W^-1 beta^T is " + std::to_string(cond));
  }
  // r + β†(v - α - βr) is the same expression with one solve.
  return r + winv_bt * m.ldlt().solve(v - alpha - beta * r);
}

// Pseudoinverse used above, exposed for property tests.
inline MatrixXd weighted_pseudoinverse(const MatrixXd& beta, const MatrixXd& w) {
  const MatrixXd winv_bt = w.llt().solve(beta.transpose());
  return winv_bt * (beta * winv_bt).inverse();
}

// ---------------------------------------------------------------------------
// Reference profiles

// Piecewise-linear in time, held constant past either end.
struct ReferenceProfile {
  std::vector<double> times{0.0};
  std::vector<double> values{0.0};

  static ReferenceProfile constant(double v) { return {{0.0}, {v}}; }

  double operator()(double t) const {
    if (times.size() != values.size() || times.empty()) throw Error(ErrorCode::invalid_config, "malformed reference table");
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto i = static_cast<std::size_t>(it - times.begin());
    const double a = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return values[i - 1] + a * (values[i] - values[i - 1]);
  }

  void validate() const {
    if (times.empty() || times.size() != values.size()) throw Error(ErrorCode::invalid_config, "reference table sizes differ");
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) throw Error(ErrorCode::invalid_config, "reference times must increase");
    }
  }
};

// ---------------------------------------------------------------------------
// Tangential loop

enum class TangentialMode { velocity_pi, position_pd };

struct TangentialGains {
  TangentialMode mode = TangentialMode::velocity_pi;
  double kp = 1.0;
  double ki = 0.0;
  double kd = 0.0;                      // position_pd only
  double integral_bound = 1e3;          // anti-windup clamp on ∫(η₂ʳᵉᶠ - η₂)
  double eta1_ref = 0.0;                // position_pd target
  ReferenceProfile eta2_ref;            // velocity reference

  void validate() const {
    if (kp < 0.0 || ki < 0.0 || kd < 0.0) throw Error(ErrorCode::invalid_config, "tangential gains must be non-negative");
    if (!(integral_bound > 0.0)) throw Error(ErrorCode::invalid_config, "integral bound must be positive");
    eta2_ref.validate();
  }
};

struct ControllerState {
  double integral = 0.0;
};

// Returns v_η; the integral advances by one first-order step before use.
inline double tangential_v(double eta1, double eta2, double t, ControllerState& cs, const TangentialGains& g, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::parameter, "control period must be positive");
  const double ref = g.eta2_ref(t);
  if (g.mode == TangentialMode::position_pd) return g.kp * (g.eta1_ref - eta1) + g.kd * (ref - eta2);
  const double e = ref - eta2;
  cs.integral = std::clamp(cs.integral + dt * e, -g.integral_bound, g.integral_bound);
  return g.kp * e + g.ki * cs.integral;
}

// ---------------------------------------------------------------------------
// Transversal loop

enum class TransversalMode { pd, robust };

struct TransversalGains {
  TransversalMode mode = TransversalMode::pd;
  VectorXd kp, kd;      // pd: per channel
  MatrixXd k, k0, k2;   // robust: (p-1) × 2(p-1), acting on ξ stacked per channel
  double mu = 0.01;

  // K₁ is not free: it is tied to K₂ so both branches meet at ‖ξ‖ = μ.
  MatrixXd k1() const { return mu * mu * k2; }

  void validate(int channels) const {
    if (mode == TransversalMode::pd) {
      if (kp.size() != channels || kd.size() != channels) {
        throw Error(ErrorCode::invalid_config, "pd transversal gains need one entry per channel");
      }
      if ((kp.array() <= 0.0).any() || (kd.array() <= 0.0).any()) {
        throw Error(ErrorCode::invalid_config, "pd transversal gains must be positive");
      }
      return;
    }
    if (!(mu > 0.0)) throw Error(ErrorCode::invalid_config, "robust law needs mu > 0");
    for (const MatrixXd* m : {&k, &k0, &k2}) {
      if (m->rows() != channels || m->cols() != 2 * channels) {
        throw Error(ErrorCode::invalid_config, "robust gains must be (p-1) x 2(p-1)");
      }
    }
  }
};

// ξ stacked as (ξ₁¹, ξ₂¹, ξ₁², ξ₂², ...).
inline VectorXd transversal_v(const VectorXd& xi, const TransversalGains& g) {
  const auto channels = xi.size() / 2;
  if (g.mode == TransversalMode::pd) {
    VectorXd v(channels);
    for (Eigen::Index j = 0; j < channels; ++j) v(j) = -g.kp(j) * xi(2 * j) - g.kd(j) * xi(2 * j + 1);
    return v;
  }
  const double n = xi.norm();
  VectorXd v = (g.k + g.k0) * xi;
  if (n >= g.mu) {
    v += g.k1() * xi / n;
  } else {
    v += g.k2 * xi * n;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Full pipeline

enum class BiasMode { zero, joint_limit };

struct RedundancyConfig {
  MatrixXd w;  // N × N, empty selects identity
  BiasMode bias = BiasMode::joint_limit;
};

struct ControllerConfig {
  ProjectionConfig projection;
  TangentialGains tangential;
  TransversalGains transversal;
  RedundancyConfig redundancy;
  Limits limits;
  bool saturate = false;
  double dt = 0.02;
};

struct StepResult {
  VectorXd u;
  VectorXd u_resolved;  // before saturation
  bool saturated = false;
  VectorXd v;
  TransformedState z;
  VectorXd alpha;
  MatrixXd beta;
  double beta_condition = 0.0;
  ProjectionState projection;
};

class Controller {
 public:
  Controller(SystemPtr system, std::shared_ptr<const SplinePath> path, ControllerConfig cfg)
      : system_(std::move(system)), path_(std::move(path)), cfg_(std::move(cfg)) {
    const int n = system_->dof();
    const int p = path_->dim();
    if (system_->output_dim() != p) throw Error(ErrorCode::invalid_config, "plant output dimension differs from path dimension");
    cfg_.projection.validate();
    cfg_.tangential.validate();
    cfg_.transversal.validate(p - 1);
    if (!(cfg_.dt > 0.0)) throw Error(ErrorCode::invalid_config, "control period must be positive");
    if (cfg_.redundancy.w.size() == 0) cfg_.redundancy.w = MatrixXd::Identity(n, n);
    if (cfg_.redundancy.w.rows() != n || cfg_.redundancy.w.cols() != n) {
      throw Error(ErrorCode::invalid_config, "W must be N x N");
    }
    if (cfg_.redundancy.bias == BiasMode::joint_limit || cfg_.saturate) cfg_.limits.validate(n);
  }

  const ControllerConfig& config() const { return cfg_; }
  const ProjectionState& projection() const { return proj_; }
  const ControllerState& state() const { return cs_; }
  const SplinePath& path() const { return *path_; }
  const MechanicalSystem& system() const { return *system_; }

  void reset(const State& x0) {
    cs_ = {};
    proj_ = global_initialize(*path_, system_->output(x0.xc), cfg_.projection);
    initialized_ = true;
  }
  void reset(const State&, const ProjectionState& known) {
    cs_ = {};
    proj_ = known;
    initialized_ = true;
  }

  StepResult step(const State& x, double t) {
    if (!initialized_) reset(x);
    StepResult out;
    const auto stage = [](const char* name, auto&& fn) {
      try {
        return fn();
      } catch (const Error& e) {
        throw Error(e.code(), std::string(name) + ": " + e.what(), e.index());
      }
    };
    proj_ = stage("projection", [&] { return update(proj_, *path_, system_->output(x.xc), cfg_.projection); });
    out.projection = proj_;
    const Frame f = stage("frame", [&] { return frame_at(*path_, proj_.k_star, proj_.lambda_star); });
    out.z = stage("transform", [&] { return to_transformed(*system_, *path_, x, proj_, f); });
    const LinearizationData lin = stage("transform", [&] { return linearize(*system_, *path_, x, proj_, f); });
    out.alpha = lin.alpha;
    out.beta = lin.beta;
    out.beta_condition = lin.beta_condition;

    const int p = path_->dim();
    out.v.resize(p);
    out.v(0) = tangential_v(out.z.eta1, out.z.eta2, t, cs_, cfg_.tangential, cfg_.dt);
    if (p > 1) out.v.tail(p - 1) = transversal_v(out.z.xi(), cfg_.transversal);

    const VectorXd r = cfg_.redundancy.bias == BiasMode::joint_limit ? bias_r(x.xc, cfg_.limits)
                                                                      : VectorXd::Zero(system_->dof());
    out.u_resolved = stage("redundancy", [&] { return resolve_input(lin.alpha, lin.beta, out.v, r, cfg_.redundancy.w); });
    out.u = out.u_resolved;
    if (cfg_.saturate) {
      out.u = out.u_resolved.cwiseMax(cfg_.limits.u_min).cwiseMin(cfg_.limits.u_max);
      out.saturated = (out.u - out.u_resolved).cwiseAbs().maxCoeff() > 0.0;
    }
    return out;
  }

 private:
  SystemPtr system_;
  std::shared_ptr<const SplinePath> path_;
  ControllerConfig cfg_;
  ProjectionState proj_;
  ControllerState cs_;
  bool initialized_ = false;
};

}  // namespace spf

#endif  // SPF_CONTROL_HPP
