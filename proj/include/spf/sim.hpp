#ifndef SPF_SIM_HPP
#define SPF_SIM_HPP

// Closed-loop simulation: zero-order-hold control, fixed-step RK4 plant
// integration, zero-dynamics portraits for one-dimensional self-motion.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint/stepper/runge_kutta4.hpp>

#include "spf/control.hpp"
#include "spf/curves.hpp"
#include "spf/dynamics.hpp"
#include "spf/errors.hpp"
#include "spf/frames.hpp"
#include "spf/projection.hpp"
#include "spf/transform.hpp"

namespace spf {

// ---------------------------------------------------------------------------
// Scenario and log

struct InitialCondition {
  enum class Mode { explicit_state, on_path };
  Mode mode = Mode::explicit_state;
  State state;                 // explicit_state
  int k = 0;                   // on_path: anchor point σ_k(λ)
  double lambda = 0.0;
  VectorXd normal_offset;      // components along e₂..e_p (empty = on path)
  double speed = 0.0;          // initial output speed along e₁
  double zeta1 = 0.0;          // Φq at the start
  double zeta2 = 0.0;          // Φq̇ at the start
  VectorXd seed;               // starting guess for the inverse kinematics
};

struct Measurement {
  bool quantize = false;
  VectorXd resolution;  // per joint
};

struct Scenario {
  std::string name;
  std::string plant = "example2";
  VectorXd plant_params;
  std::shared_ptr<const SplinePath> path;
  InitialCondition initial;
  ControllerConfig controller;
  double duration = 10.0;
  int substeps = 10;
  Measurement measurement;

  void validate() const {
    if (!path) throw Error(ErrorCode::invalid_config, "scenario has no path");
    if (!(duration > 0.0)) throw Error(ErrorCode::invalid_config, "duration must be positive");
    if (!(controller.dt > 0.0)) throw Error(ErrorCode::invalid_config, "dt must be positive");
    if (substeps < 1) throw Error(ErrorCode::invalid_config, "substeps must be at least 1");
  }
};

struct LogRow {
  double t = 0.0;
  State x;
  VectorXd u;
  TransformedState z;
  bool saturated = false;
  int iterations = 0;
  double beta_condition = 0.0;
};

struct RunSummary {
  double max_xi1 = 0.0;              // max over the run of ‖ξ₁‖
  double final_xi1 = 0.0;
  double max_xi1_tail = 0.0;         // over the last quarter of the run
  double eta2_error_tail = 0.0;      // max |η₂ - η₂ʳᵉᶠ| over the last quarter
  double eta2_ref_final = 0.0;
  int saturation_events = 0;
  int max_iterations = 0;
  VectorXd zeta_min, zeta_max;
  VectorXd xc_min, xc_max;
};

struct RunLog {
  std::vector<LogRow> rows;
  RunSummary summary;
  std::optional<std::string> failure;
  double failure_time = 0.0;
};

class RunAborted : public Error {
 public:
  RunAborted(const Error& cause, double t, RunLog partial)
      : Error(cause.code(), "t = " + std::to_string(t) + ": " + cause.what(), cause.index()),
        time_(t),
        log_(std::move(partial)) {}
  double time() const noexcept { return time_; }
  const RunLog& log() const noexcept { return log_; }

 private:
  double time_;
  RunLog log_;
};

inline constexpr double kDivergenceBound = 1e6;

// ---------------------------------------------------------------------------
// Inverse kinematics for plants with one redundant degree of freedom

// Solves h(q) = y, Φq = ζ₁ by Newton's method on the square system.
inline VectorXd solve_configuration(const MechanicalSystem& sys, const VectorXd& y, double zeta1, VectorXd q,
                                    int max_iters = 100) {
  const MatrixXd phi = sys.completion();
  if (phi.rows() + sys.output_dim() != sys.dof()) {
    throw Error(ErrorCode::invalid_config, "configuration solve needs N = p + rows(Φ)");
  }
  for (int it = 0; it < max_iters; ++it) {
    VectorXd r(sys.dof());
    r << sys.output(q) - y, phi * q - VectorXd::Constant(phi.rows(), zeta1);
    if (r.norm() < 1e-13) return q;
    MatrixXd jac(sys.dof(), sys.dof());
    jac << sys.jacobian(q), phi;
    Eigen::FullPivLU<MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw Error(ErrorCode::singularity, "configuration solve hit a singular Jacobian");
    VectorXd dq = lu.solve(r);
    const double cap = 0.5;
    if (dq.norm() > cap) dq *= cap / dq.norm();
    q -= dq;
  }
  VectorXd r(sys.dof());
  r << sys.output(q) - y, phi * q - VectorXd::Constant(phi.rows(), zeta1);
  if (r.norm() > 1e-9) throw Error(ErrorCode::non_convergence, "configuration solve did not converge");
  return q;
}

// Velocity with output velocity w and completion rate ζ₂.
inline VectorXd solve_velocity(const MechanicalSystem& sys, const VectorXd& q, const VectorXd& w, double zeta2) {
  const MatrixXd phi = sys.completion();
  MatrixXd jac(sys.dof(), sys.dof());
  jac << sys.jacobian(q), phi;
  VectorXd rhs(sys.dof());
  rhs << w, VectorXd::Constant(phi.rows(), zeta2);
  return jac.fullPivLu().solve(rhs);
}

inline State initial_state(const MechanicalSystem& sys, const SplinePath& path, const InitialCondition& ic) {
  if (ic.mode == InitialCondition::Mode::explicit_state) {
    if (ic.state.xc.size() != sys.dof() || ic.state.xv.size() != sys.dof()) {
      throw Error(ErrorCode::invalid_config, "initial state has wrong dimension");
    }
    return ic.state;
  }
  const Frame f = frame_at(path, ic.k, ic.lambda);
  VectorXd y = f.point;
  for (Eigen::Index j = 0; j < ic.normal_offset.size(); ++j) y += ic.normal_offset(j) * f.e.col(j + 1);
  VectorXd seed = ic.seed.size() == sys.dof() ? ic.seed : VectorXd::Zero(sys.dof());
  State x;
  x.xc = solve_configuration(sys, y, ic.zeta1, seed);
  x.xv = solve_velocity(sys, x.xc, ic.speed * f.e.col(0), ic.zeta2);
  return x;
}

// ---------------------------------------------------------------------------
// Plant integration

// RK4 over one hold interval of length h with constant input u.
inline State integrate_hold(const MechanicalSystem& sys, const State& x, const VectorXd& u, double t, double h, int substeps) {
  namespace odeint = boost::numeric::odeint;
  using Vec = std::vector<double>;
  const int n = sys.dof();
  auto rhs = [&](const Vec& s, Vec& ds, double) {
    State xs;
    xs.xc = Eigen::Map<const VectorXd>(s.data(), n);
    xs.xv = Eigen::Map<const VectorXd>(s.data() + n, n);
    const VectorXd acc = acceleration(sys, xs, u);
    for (int i = 0; i < n; ++i) {
      ds[static_cast<std::size_t>(i)] = xs.xv(i);
      ds[static_cast<std::size_t>(n + i)] = acc(i);
    }
  };
  Vec s(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    s[static_cast<std::size_t>(i)] = x.xc(i);
    s[static_cast<std::size_t>(n + i)] = x.xv(i);
  }
  odeint::runge_kutta4<Vec> stepper;
  const double dt = h / substeps;
  for (int i = 0; i < substeps; ++i) stepper.do_step(rhs, s, t + i * dt, dt);
  State out;
  out.xc = Eigen::Map<const VectorXd>(s.data(), n);
  out.xv = Eigen::Map<const VectorXd>(s.data() + n, n);
  return out;
}

// ---------------------------------------------------------------------------
// Closed-loop run

namespace detail {

inline void summarize(RunLog& log, const Scenario& sc) {
  auto& s = log.summary;
  if (log.rows.empty()) return;
  const double tail_start = log.rows.back().t * 0.75;
  s.zeta_min = s.zeta_max = log.rows.front().z.zeta;
  s.xc_min = s.xc_max = log.rows.front().x.xc;
  for (const auto& r : log.rows) {
    const double xi = r.z.xi1.size() ? r.z.xi1.norm() : 0.0;
    s.max_xi1 = std::max(s.max_xi1, xi);
    s.max_iterations = std::max(s.max_iterations, r.iterations);
    s.saturation_events += r.saturated ? 1 : 0;
    s.zeta_min = s.zeta_min.cwiseMin(r.z.zeta);
    s.zeta_max = s.zeta_max.cwiseMax(r.z.zeta);
    s.xc_min = s.xc_min.cwiseMin(r.x.xc);
    s.xc_max = s.xc_max.cwiseMax(r.x.xc);
    if (r.t >= tail_start) {
      s.max_xi1_tail = std::max(s.max_xi1_tail, xi);
      const double ref = sc.controller.tangential.eta2_ref(r.t);
      s.eta2_error_tail = std::max(s.eta2_error_tail, std::abs(r.z.eta2 - ref));
    }
  }
  const auto& last = log.rows.back();
  s.final_xi1 = last.z.xi1.size() ? last.z.xi1.norm() : 0.0;
  s.eta2_ref_final = sc.controller.tangential.eta2_ref(last.t);
}

inline State measure(const State& truth, const Measurement& m, const std::optional<VectorXd>& previous, double dt) {
  if (!m.quantize) return truth;
  State x;
  x.xc = truth.xc;
  for (Eigen::Index i = 0; i < x.xc.size(); ++i) {
    const double r = m.resolution.size() == x.xc.size() ? m.resolution(i) : 0.0;
    if (r > 0.0) x.xc(i) = r * std::round(truth.xc(i) / r);
  }
  x.xv = previous ? ((x.xc - *previous) / dt).eval() : VectorXd::Zero(x.xc.size()).eval();
  return x;
}

}  // namespace detail

struct RunOptions {
  // Optional hook, called after each control step with the controller's view.
  std::function<void(const LogRow&, const StepResult&)> on_step;
  std::optional<ProjectionState> known_projection;
};

inline RunLog run(const Scenario& sc, SystemPtr sys, const RunOptions& opts = {}) {
  sc.validate();
  const State x0 = initial_state(*sys, *sc.path, sc.initial);
  Controller ctl(sys, sc.path, sc.controller);
  if (opts.known_projection) {
    ctl.reset(x0, *opts.known_projection);
  } else {
    ctl.reset(x0);
  }
  RunLog log;
  const double dt = sc.controller.dt;
  const auto steps = static_cast<long>(std::llround(sc.duration / dt));
  log.rows.reserve(static_cast<std::size_t>(steps + 1));
  State x = x0;
  std::optional<VectorXd> previous;
  for (long i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    LogRow row;
    row.t = t;
    row.x = x;
    try {
      const State xm = detail::measure(x, sc.measurement, previous, dt);
      previous = xm.xc;
      const StepResult res = ctl.step(xm, t);
      row.u = res.u;
      row.z = res.z;
      row.saturated = res.saturated;
      row.iterations = res.projection.last_iterations;
      row.beta_condition = res.beta_condition;
      log.rows.push_back(row);
      if (opts.on_step) opts.on_step(row, res);
      if (i == steps) break;
      x = integrate_hold(*sys, x, res.u, t, dt, sc.substeps);
      if (!x.xc.allFinite() || !x.xv.allFinite() || x.stacked().norm() > kDivergenceBound) {
        throw Error(ErrorCode::divergence, "state norm exceeded " + std::to_string(kDivergenceBound));
      }
    } catch (const Error& e) {
      log.failure = e.what();
      log.failure_time = t;
      detail::summarize(log, sc);
      throw RunAborted(e, t, std::move(log));
    }
  }
  detail::summarize(log, sc);
  return log;
}

inline RunLog run(const Scenario& sc, const RunOptions& opts = {}) {
  return run(sc, make_system(sc.plant, sc.plant_params), opts);
}

// ---------------------------------------------------------------------------
// Boundedness

struct BoundednessReport {
  bool zeta_bounded = true;
  bool joint_limits_ok = true;
  double worst_violation = 0.0;  // beyond the band, configuration units
  int worst_joint = -1;
  int saturation_events = 0;
  double zeta_sup = 0.0;
};

inline BoundednessReport boundedness_report(const RunLog& log, const Limits& limits, double band, double zeta_bound,
                                            const std::vector<int>& joints = {}) {
  BoundednessReport b;
  b.saturation_events = log.summary.saturation_events;
  for (const auto& r : log.rows) {
    b.zeta_sup = std::max(b.zeta_sup, r.z.zeta.cwiseAbs().maxCoeff());
    const int n = static_cast<int>(r.x.xc.size());
    for (int i = 0; i < n; ++i) {
      if (!joints.empty() && std::find(joints.begin(), joints.end(), i) == joints.end()) continue;
      const double over = std::max(r.x.xc(i) - (limits.xc_max(i) + band), (limits.xc_min(i) - band) - r.x.xc(i));
      if (over > b.worst_violation) {
        b.worst_violation = over;
        b.worst_joint = i;
      }
    }
  }
  b.joint_limits_ok = b.worst_violation <= 0.0;
  b.zeta_bounded = std::isfinite(b.zeta_sup) && b.zeta_sup < zeta_bound && !log.failure;
  return b;
}

// ---------------------------------------------------------------------------
// Continuity of the control across junctions

struct JunctionCrossing {
  double time = 0.0;
  int k_from = 0;
  int k_to = 0;
  double u_jump = 0.0;     // ‖u⁺ - u⁻‖ / max(1, ‖u‖) over a ±δ window at the crossing
  double tbar_jump = 0.0;  // max |T̄_k - T̄_{k'}| at the crossing state
};

// Locates every k* change in the log, bisects the crossing time along the
// held-input flow, and evaluates the control law on both sides.
inline std::vector<JunctionCrossing> junction_crossings(const Scenario& sc, SystemPtr sys, const RunLog& log,
                                                        double delta = 1e-7) {
  std::vector<JunctionCrossing> out;
  const SplinePath& path = *sc.path;
  const double dt = sc.controller.dt;
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    const auto& a = log.rows[i - 1];
    const auto& b = log.rows[i];
    if (a.z.k_star == b.z.k_star) continue;
    const int ka = a.z.k_star;
    const int kb = b.z.k_star;
    const bool forward = path.next(ka) == kb;
    const int kj = forward ? ka : kb;  // junction at the end of segment kj
    const VectorXd pj = path.segment(kj).derivative(path.segment(kj).lambda_max(), 0);
    const VectorXd tj = path.segment(kj).derivative(path.segment(kj).lambda_max(), 1);
    auto side = [&](double tau) {
      const State x = integrate_hold(*sys, a.x, a.u, a.t, tau, std::max(1, static_cast<int>(std::ceil(tau / dt * sc.substeps))));
      return std::pair{x, (sys->output(x.xc) - pj).dot(tj)};
    };
    double lo = 0.0, hi = dt;
    const double s0 = side(lo).second;
    if (s0 * side(hi).second > 0.0) continue;  // crossed by projection only, not the hyperplane
    for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      ((side(mid).second > 0.0) == (s0 > 0.0) ? lo : hi) = mid;
    }
    const double tc = 0.5 * (lo + hi);
    const State xm = side(std::max(0.0, tc - delta)).first;
    const State xp = side(std::min(dt, tc + delta)).first;
    const State xc = side(tc).first;

    // Same controller state on both sides: the integral is frozen over a hold.
    auto control_at = [&](const State& x, int k, double lambda) {
      Controller ctl(sys, sc.path, sc.controller);
      ProjectionState ps;
      ps.k_star = k;
      ps.lambda_star = lambda;
      ctl.reset(x, ps);
      return ctl.step(x, a.t);
    };
    const auto& sa = path.segment(ka);
    const auto& sb = path.segment(kb);
    const double la = forward ? sa.lambda_max() : sa.lambda_min();
    const double lb = forward ? sb.lambda_min() : sb.lambda_max();
    const StepResult um = control_at(xm, ka, la);
    const StepResult up = control_at(xp, kb, lb);
    JunctionCrossing c;
    c.time = a.t + tc;
    c.k_from = ka;
    c.k_to = kb;
    c.u_jump = (up.u_resolved - um.u_resolved).norm() / std::max(1.0, um.u_resolved.norm());

    ProjectionState pa, pb;
    pa.k_star = ka;
    pa.lambda_star = la;
    pb.k_star = kb;
    pb.lambda_star = lb;
    pa = update(pa, path, sys->output(xc.xc), sc.controller.projection);
    pb = update(pb, path, sys->output(xc.xc), sc.controller.projection);
    pa.k_star = ka;
    pb.k_star = kb;
    pa.lambda_star = la;
    pb.lambda_star = lb;
    const VectorXd ta = to_transformed(*sys, path, xc, pa).bar();
    const VectorXd tb = to_transformed(*sys, path, xc, pb).bar();
    c.tbar_jump = (ta - tb).cwiseAbs().maxCoeff();
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Zero-dynamics portrait for one redundant degree of freedom

struct PortraitConfig {
  int k = 0;
  double lambda = 0.0;          // held path point
  VectorXd seed;                // configuration guess on the branch of interest
  double zeta1_ref = 0.0;       // ζ₁ of the reference configuration q*
  double zeta1_min = -1.0, zeta1_max = 1.0;
  double zeta2_min = -1.0, zeta2_max = 1.0;
  int n1 = 20, n2 = 20;
  double duration = 20.0;
  int substeps = 4;
  double manifold_step = 0.01;        // joint-space arclength between samples
  double max_manifold_length = 50.0;  // for self-motion sets that do not close
  double converged_radius = 1e-2;
  int threads = 0;  // 0 = hardware concurrency
};

struct PortraitFlow {
  double zeta1_0 = 0.0, zeta2_0 = 0.0;
  bool feasible = true;       // initial ζ₁ reachable on the reference branch
  bool failed = false;        // controller aborted (singularity etc.)
  std::string message;
  std::vector<double> t, zeta1, zeta2;
  bool converged_to_reference = false;
};

struct Equilibrium {
  VectorXd q;
  Eigen::Vector2d zeta;
  std::complex<double> eig0, eig1;
  bool stable = false;               // both eigenvalues in the open left half plane
  double jacobian_sigma_ratio = 0.0; // σ_min/σ_max of J
  double chart_slope = 0.0;          // |Φn̂|; zero where ζ₁ stops being a coordinate
};

struct PhasePortrait {
  std::vector<PortraitFlow> flows;
  std::vector<Equilibrium> equilibria;
  VectorXd q_ref;
  std::vector<VectorXd> manifold;  // sampled self-motion set
  bool manifold_closed = false;
};

namespace detail {

// Unit null vector of a p × (p+1) Jacobian by cofactor expansion.
inline VectorXd null_direction(const MatrixXd& j) {
  const int n = static_cast<int>(j.cols());
  VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    MatrixXd minor(j.rows(), n - 1);
    int c = 0;
    for (int k = 0; k < n; ++k)
      if (k != i) minor.col(c++) = j.col(k);
    v(i) = ((i % 2) ? -1.0 : 1.0) * minor.determinant();
  }
  const double nv = v.norm();
  if (!(nv > 0.0)) throw Error(ErrorCode::singularity, "self-motion direction undefined at a Jacobian singularity");
  return v / nv;
}

inline VectorXd project_to_fiber(const MechanicalSystem& sys, const VectorXd& y, VectorXd q) {
  for (int it = 0; it < 50; ++it) {
    const VectorXd r = sys.output(q) - y;
    if (r.norm() < 1e-14) break;
    const MatrixXd j = sys.jacobian(q);
    q -= j.transpose() * (j * j.transpose()).ldlt().solve(r);
  }
  return q;
}

}  // namespace detail

// Samples the connected self-motion set {q : h(q) = y} through q0, ordered by
// joint-space arclength; `closed` when it returns to q0.
inline std::vector<VectorXd> trace_self_motion(const MechanicalSystem& sys, const VectorXd& y, const VectorXd& q0,
                                               double step, double max_length, bool& closed) {
  std::vector<VectorXd> pts{q0};
  closed = false;
  VectorXd dir = detail::null_direction(sys.jacobian(q0));
  VectorXd q = q0;
  const int max_steps = static_cast<int>(max_length / step);
  for (int i = 0; i < max_steps; ++i) {
    VectorXd n = detail::null_direction(sys.jacobian(q));
    if (n.dot(dir) < 0.0) n = -n;
    // Midpoint predictor keeps the tracing second order.
    const VectorXd qm = detail::project_to_fiber(sys, y, q + 0.5 * step * n);
    VectorXd nm = detail::null_direction(sys.jacobian(qm));
    if (nm.dot(n) < 0.0) nm = -nm;
    q = detail::project_to_fiber(sys, y, q + step * nm);
    dir = nm;
    if (i > 4 && (q - q0).norm() < 0.75 * step) {
      closed = true;
      break;
    }
    pts.push_back(q);
  }
  if (!closed) {
    // Open set: also walk the other way and prepend.
    std::vector<VectorXd> back;
    q = q0;
    dir = -detail::null_direction(sys.jacobian(q0));
    for (int i = 0; i < max_steps; ++i) {
      VectorXd n = detail::null_direction(sys.jacobian(q));
      if (n.dot(dir) < 0.0) n = -n;
      q = detail::project_to_fiber(sys, y, q + step * n);
      dir = n;
      back.push_back(q);
    }
    std::reverse(back.begin(), back.end());
    back.insert(back.end(), pts.begin(), pts.end());
    pts = std::move(back);
  }
  return pts;
}

namespace detail {

// Acceleration along the self-motion direction when the closed loop holds
// the output at y: s̈ for q̇ = ṡ n̂.
inline double self_motion_acceleration(const MechanicalSystem& sys, const Scenario& sc, const ProjectionState& ps,
                                       const VectorXd& q, double sdot, const VectorXd& orient) {
  VectorXd n = null_direction(sys.jacobian(q));
  if (n.dot(orient) < 0.0) n = -n;
  State x{q, sdot * n};
  Controller ctl(std::shared_ptr<const MechanicalSystem>(&sys, [](const MechanicalSystem*) {}), sc.path, sc.controller);
  ctl.reset(x, ps);
  const StepResult r = ctl.step(x, 0.0);
  return n.dot(acceleration(sys, x, r.u));
}

}  // namespace detail

// `sc` supplies the path, controller gains and limits; the tangential loop
// must hold η₁ at the point (position_pd).
inline PhasePortrait zero_dynamics_portrait(SystemPtr sys, const Scenario& sc, const PortraitConfig& pc) {
  const SplinePath& path = *sc.path;
  if (sys->dof() != sys->output_dim() + 1) {
    throw Error(ErrorCode::invalid_config, "portrait needs exactly one redundant degree of freedom");
  }
  PhasePortrait out;
  const VectorXd y = path.evaluate(pc.k, pc.lambda, 0);
  const VectorXd phi = sys->completion().row(0).transpose();
  out.q_ref = solve_configuration(*sys, y, pc.zeta1_ref, pc.seed.size() ? pc.seed : VectorXd::Zero(sys->dof()));
  ProjectionState ps;
  ps.k_star = pc.k;
  ps.lambda_star = pc.lambda;

  // Equilibria: zeros of the at-rest self-motion acceleration along the set.
  out.manifold = trace_self_motion(*sys, y, out.q_ref, pc.manifold_step, pc.max_manifold_length, out.manifold_closed);
  const auto& m = out.manifold;
  std::vector<VectorXd> orient(m.size());
  {
    // Consistent orientation along the trace.
    VectorXd o = detail::null_direction(sys->jacobian(m.front()));
    for (std::size_t i = 0; i < m.size(); ++i) {
      VectorXd n = detail::null_direction(sys->jacobian(m[i]));
      if (i > 0 && n.dot(o) < 0.0) n = -n;
      orient[i] = o = n;
    }
  }
  std::vector<double> c(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) c[i] = detail::self_motion_acceleration(*sys, sc, ps, m[i], 0.0, orient[i]);
  double cscale = 0.0;
  for (double v : c) cscale = std::max(cscale, std::abs(v));
  const auto zero = [&](double v) { return std::abs(v) <= 1e-9 * cscale; };
  const std::size_t segments = out.manifold_closed ? m.size() : m.size() - 1;
  for (std::size_t i = 0; i < segments; ++i) {
    const std::size_t j = (i + 1) % m.size();
    // Samples that already sit on a zero (q* itself, typically) are taken as is.
    if (zero(c[i]) || (!zero(c[j]) && c[i] * c[j] < 0.0)) {
      double lo = 0.0, hi = 1.0;
      VectorXd qe = m[i];
      for (int it = 0; it < 60 && !zero(c[i]); ++it) {
        const double mid = 0.5 * (lo + hi);
        qe = detail::project_to_fiber(*sys, y, (1.0 - mid) * m[i] + mid * m[j]);
        const double cm = detail::self_motion_acceleration(*sys, sc, ps, qe, 0.0, orient[i]);
        ((cm > 0.0) == (c[i] > 0.0) ? lo : hi) = mid;
        if (hi - lo < 1e-12) break;
      }
      Equilibrium e;
      e.q = qe;
      e.zeta = Eigen::Vector2d(phi.dot(qe), 0.0);
      // Linearize s̈ = F(s, ṡ) by central differences.
      const double h = 1e-6;
      const VectorXd n = orient[i];
      auto at_s = [&](double s) { return detail::project_to_fiber(*sys, y, qe + s * n); };
      const double fs = (detail::self_motion_acceleration(*sys, sc, ps, at_s(h), 0.0, n) -
                         detail::self_motion_acceleration(*sys, sc, ps, at_s(-h), 0.0, n)) / (2 * h);
      const double fv = (detail::self_motion_acceleration(*sys, sc, ps, qe, h, n) -
                         detail::self_motion_acceleration(*sys, sc, ps, qe, -h, n)) / (2 * h);
      const std::complex<double> disc = std::sqrt(std::complex<double>(fv * fv + 4.0 * fs));
      e.eig0 = 0.5 * (fv + disc);
      e.eig1 = 0.5 * (fv - disc);
      // Round-off must not turn a center into a sink.
      const double tol = 1e-7 * (1.0 + std::abs(e.eig0));
      e.stable = e.eig0.real() < -tol && e.eig1.real() < -tol;
      Eigen::JacobiSVD<MatrixXd> svd(sys->jacobian(qe));
      e.jacobian_sigma_ratio = svd.singularValues().minCoeff() / svd.singularValues().maxCoeff();
      e.chart_slope = std::abs(phi.dot(n));
      bool duplicate = false;
      for (const auto& other : out.equilibria) duplicate = duplicate || (other.q - e.q).norm() < 1e-3;
      if (!duplicate) out.equilibria.push_back(e);
    }
  }

  // Flows from the (ζ₁, ζ₂) grid, placed on the branch through q*.
  out.flows.resize(static_cast<std::size_t>(pc.n1 * pc.n2));
  auto work = [&](std::size_t idx) {
    auto& fl = out.flows[idx];
    const int i1 = static_cast<int>(idx) / pc.n2;
    const int i2 = static_cast<int>(idx) % pc.n2;
    fl.zeta1_0 = pc.n1 > 1 ? pc.zeta1_min + (pc.zeta1_max - pc.zeta1_min) * i1 / (pc.n1 - 1) : pc.zeta1_min;
    fl.zeta2_0 = pc.n2 > 1 ? pc.zeta2_min + (pc.zeta2_max - pc.zeta2_min) * i2 / (pc.n2 - 1) : pc.zeta2_min;
    // Continuation in ζ₁ from q* keeps the solve on the reference branch.
    VectorXd q = out.q_ref;
    try {
      const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(fl.zeta1_0 - pc.zeta1_ref) / 0.02)));
      for (int s = 1; s <= pieces; ++s) {
        const double z = pc.zeta1_ref + (fl.zeta1_0 - pc.zeta1_ref) * s / pieces;
        const VectorXd next = solve_configuration(*sys, y, z, q, 30);
        if ((next - q).norm() > 0.5) throw Error(ErrorCode::singularity, "left the reference branch");
        q = next;
      }
    } catch (const Error& e) {
      fl.feasible = false;
      fl.message = e.what();
      return;
    }
    Scenario local = sc;
    local.duration = pc.duration;
    local.substeps = pc.substeps;
    local.initial.mode = InitialCondition::Mode::explicit_state;
    local.initial.state.xc = q;
    local.initial.state.xv = solve_velocity(*sys, q, VectorXd::Zero(sys->output_dim()), fl.zeta2_0);
    RunOptions opts;
    opts.known_projection = ps;
    opts.on_step = [&fl](const LogRow& row, const StepResult&) {
      fl.t.push_back(row.t);
      fl.zeta1.push_back(row.z.zeta(0));
      fl.zeta2.push_back(row.z.zeta(1));
    };
    try {
      run(local, sys, opts);
    } catch (const Error& e) {
      fl.failed = true;
      fl.message = e.what();
    }
    if (!fl.failed && !fl.t.empty()) {
      const double dz1 = fl.zeta1.back() - pc.zeta1_ref;
      const double dz2 = fl.zeta2.back();
      fl.converged_to_reference = std::hypot(dz1, dz2) < pc.converged_radius;
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned nthreads = pc.threads > 0 ? static_cast<unsigned>(pc.threads) : hw;
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (unsigned t = 0; t < nthreads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < out.flows.size(); i = next++) work(i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace spf

#endif  // SPF_SIM_HPP
