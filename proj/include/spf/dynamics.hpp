#ifndef SPF_DYNAMICS_HPP
#define SPF_DYNAMICS_HPP

// Euler-Lagrange plants D(q)q̈ + C(q,q̇)q̇ + G(q) + B(q)q̇ = A(q)u with an
// output map y = h(q).

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spf/detail/jet.hpp"
#include "spf/errors.hpp"

namespace spf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct State {
  VectorXd xc;  // configuration
  VectorXd xv;  // velocity

  VectorXd stacked() const {
    VectorXd x(xc.size() + xv.size());
    x << xc, xv;
    return x;
  }
  static State from_stacked(const VectorXd& x) {
    const auto n = x.size() / 2;
    return {x.head(n), x.tail(n)};
  }
};

struct Limits {
  VectorXd xc_min, xc_max;
  VectorXd u_min, u_max;

  void validate(int n) const {
    if (xc_min.size() != n || xc_max.size() != n || u_min.size() != n || u_max.size() != n) {
      throw Error(ErrorCode::invalid_config, "limits must have one entry per joint");
    }
    for (int i = 0; i < n; ++i) {
      if (!(xc_min(i) < xc_max(i))) throw Error(ErrorCode::invalid_config, "joint limits need min < max", i);
      if (!(u_min(i) < u_max(i))) throw Error(ErrorCode::invalid_config, "input limits need min < max", i);
    }
  }
};

class MechanicalSystem {
 public:
  virtual ~MechanicalSystem() = default;

  virtual std::string name() const = 0;
  virtual int dof() const = 0;
  virtual int output_dim() const = 0;

  virtual MatrixXd inertia(const VectorXd& q) const = 0;
  virtual MatrixXd coriolis(const VectorXd& q, const VectorXd& qd) const = 0;
  virtual VectorXd gravity(const VectorXd& q) const = 0;
  // Viscous damping B(q); the force is -B q̇.
  virtual MatrixXd damping(const VectorXd& q) const = 0;
  virtual MatrixXd input_matrix(const VectorXd& q) const = 0;

  virtual VectorXd output(const VectorXd& q) const = 0;
  virtual MatrixXd jacobian(const VectorXd& q) const = 0;
  // ∂(J(q)v)/∂q · v
  virtual VectorXd jacobian_rate_contraction(const VectorXd& q, const VectorXd& v) const = 0;

  virtual double potential_energy(const VectorXd&) const { return 0.0; }

  // Rows Φ of the completion ζ = (Φq, Φq̇).
  virtual MatrixXd completion() const = 0;
};

using SystemPtr = std::shared_ptr<const MechanicalSystem>;

struct DriftInput {
  VectorXd f_v;
  MatrixXd g_v;
};

inline DriftInput drift_and_input(const MechanicalSystem& sys, const State& x) {
  const MatrixXd d = sys.inertia(x.xc);
  Eigen::LLT<MatrixXd> llt(d);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::non_spd_inertia, "inertia matrix is not positive definite");
  const VectorXd rhs = sys.coriolis(x.xc, x.xv) * x.xv + sys.gravity(x.xc) + sys.damping(x.xc) * x.xv;
  return {-llt.solve(rhs), llt.solve(sys.input_matrix(x.xc))};
}

inline VectorXd acceleration(const MechanicalSystem& sys, const State& x, const VectorXd& u) {
  const auto fg = drift_and_input(sys, x);
  return fg.f_v + fg.g_v * u;
}

inline VectorXd completion_state(const MechanicalSystem& sys, const State& x) {
  const MatrixXd phi = sys.completion();
  VectorXd z(2 * phi.rows());
  z << phi * x.xc, phi * x.xv;
  return z;
}

inline double kinetic_energy(const MechanicalSystem& sys, const State& x) {
  return 0.5 * x.xv.dot(sys.inertia(x.xc) * x.xv);
}

// ---------------------------------------------------------------------------
// Plants defined by templated inertia, potential and output maps. Partial
// derivatives come from second-order jets, C from Christoffel symbols.
//
// Model requirements:
//   int dof, output_dim;
//   template <class S> Matrix<S,-1,-1> inertia(const Matrix<S,-1,1>& q) const;
//   template <class S> S potential(const Matrix<S,-1,1>& q) const;
//   template <class S> Matrix<S,-1,1> output(const Matrix<S,-1,1>& q) const;
//   MatrixXd damping(q), input_matrix(q), completion();  std::string name;
template <class Model>
class LagrangianSystem : public MechanicalSystem {
 public:
  using Jet = detail::Jet;
  using JetVector = Eigen::Matrix<Jet, Eigen::Dynamic, 1>;

  explicit LagrangianSystem(Model model) : model_(std::move(model)) {}

  const Model& model() const { return model_; }

  std::string name() const override { return model_.name; }
  int dof() const override { return model_.dof; }
  int output_dim() const override { return model_.output_dim; }

  MatrixXd inertia(const VectorXd& q) const override { return model_.template inertia<double>(q); }

  MatrixXd coriolis(const VectorXd& q, const VectorXd& qd) const override {
    const int n = dof();
    std::vector<MatrixXd> dd(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) dd[static_cast<std::size_t>(m)] = inertia_partial(q, m);
    MatrixXd c = MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          const auto si = static_cast<std::size_t>(i);
          const auto sj = static_cast<std::size_t>(j);
          const auto sk = static_cast<std::size_t>(k);
          acc += 0.5 * (dd[si](k, j) + dd[sj](k, i) - dd[sk](i, j)) * qd(i);
        }
        c(k, j) = acc;
      }
    }
    return c;
  }

  VectorXd gravity(const VectorXd& q) const override {
    VectorXd g(dof());
    for (int m = 0; m < dof(); ++m) g(m) = model_.template potential<Jet>(seed(q, unit(m))).d;
    return g;
  }

  MatrixXd damping(const VectorXd& q) const override { return model_.damping(q); }
  MatrixXd input_matrix(const VectorXd& q) const override { return model_.input_matrix(q); }

  VectorXd output(const VectorXd& q) const override { return model_.template output<double>(q); }

  MatrixXd jacobian(const VectorXd& q) const override {
    MatrixXd j(output_dim(), dof());
    for (int m = 0; m < dof(); ++m) {
      const JetVector y = model_.template output<Jet>(seed(q, unit(m)));
      for (int r = 0; r < output_dim(); ++r) j(r, m) = y(r).d;
    }
    return j;
  }

  VectorXd jacobian_rate_contraction(const VectorXd& q, const VectorXd& v) const override {
    const JetVector y = model_.template output<Jet>(seed(q, v));
    VectorXd out(output_dim());
    for (int r = 0; r < output_dim(); ++r) out(r) = y(r).dd;
    return out;
  }

  double potential_energy(const VectorXd& q) const override { return model_.template potential<double>(q); }

  MatrixXd completion() const override { return model_.completion(); }

  MatrixXd inertia_partial(const VectorXd& q, int m) const {
    const auto dj = model_.template inertia<Jet>(seed(q, unit(m)));
    MatrixXd out(dof(), dof());
    for (int r = 0; r < dof(); ++r)
      for (int c = 0; c < dof(); ++c) out(r, c) = dj(r, c).d;
    return out;
  }

 private:
  VectorXd unit(int m) const { return VectorXd::Unit(dof(), m); }

  static JetVector seed(const VectorXd& q, const VectorXd& direction) {
    JetVector s(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) s(i) = Jet::variable(q(i), direction(i));
    return s;
  }

  Model model_;
};

// ---------------------------------------------------------------------------
// Two blocks on a line, the top one observed.

struct TwoMassModel {
  std::string name = "example1";
  int dof = 2;
  int output_dim = 1;
  double m1 = 1, m2 = 1, b1 = 1, b2 = 1;

  template <class S>
  Eigen::Matrix<S, -1, -1> inertia(const Eigen::Matrix<S, -1, 1>&) const {
    Eigen::Matrix<S, -1, -1> d = Eigen::Matrix<S, -1, -1>::Zero(2, 2);
    d(0, 0) = S(m1);
    d(1, 1) = S(m2);
    return d;
  }
  template <class S>
  S potential(const Eigen::Matrix<S, -1, 1>&) const { return S(0.0); }
  template <class S>
  Eigen::Matrix<S, -1, 1> output(const Eigen::Matrix<S, -1, 1>& q) const {
    Eigen::Matrix<S, -1, 1> y(1);
    y(0) = q(1);
    return y;
  }
  MatrixXd damping(const VectorXd&) const {
    MatrixXd b(2, 2);
    b << b1 + b2, -b2, -b2, b2;
    return b;
  }
  MatrixXd input_matrix(const VectorXd&) const { return MatrixXd::Identity(2, 2); }
  MatrixXd completion() const { return (MatrixXd(1, 2) << 1.0, 0.0).finished(); }
};

inline std::shared_ptr<LagrangianSystem<TwoMassModel>> make_example1(double m1, double m2, double b1, double b2) {
  if (!(m1 > 0 && m2 > 0 && b1 > 0 && b2 > 0)) {
    throw Error(ErrorCode::parameter, "example1 parameters must be positive");
  }
  TwoMassModel m;
  m.m1 = m1;
  m.m2 = m2;
  m.b1 = b1;
  m.b2 = b2;
  return std::make_shared<LagrangianSystem<TwoMassModel>>(m);
}

// ---------------------------------------------------------------------------
// Serial chain of revolute joints moving in one plane.

namespace detail {

// D_jk = Σ_i [ m_i Σ_{a,b} w_ia w_ib cos(φ_a - φ_b) + I_i ], a ∈ [j, i], b ∈ [k, i],
// with φ_a the absolute angle of link a and w_ia = L_a (a < i) or c_i (a = i).
template <class S>
Eigen::Matrix<S, -1, -1> planar_chain_inertia(const std::vector<S>& phi, const VectorXd& length,
                                              const VectorXd& com, const VectorXd& mass, const VectorXd& rot) {
  using std::cos;
  const int n = static_cast<int>(phi.size());
  Eigen::Matrix<S, -1, -1> d(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) d(j, k) = S(0.0);
  for (int i = 0; i < n; ++i) {
    auto w = [&](int a) { return a < i ? length(a) : com(i); };
    for (int j = 0; j <= i; ++j) {
      for (int k = 0; k <= i; ++k) {
        S acc(0.0);
        for (int a = j; a <= i; ++a)
          for (int b = k; b <= i; ++b) acc += S(w(a) * w(b)) * cos(phi[static_cast<std::size_t>(a)] - phi[static_cast<std::size_t>(b)]);
        d(j, k) += S(mass(i)) * acc + S(rot(i));
      }
    }
  }
  return d;
}

template <class S>
std::vector<S> absolute_angles(const Eigen::Matrix<S, -1, 1>& q, int first, int count) {
  std::vector<S> phi(static_cast<std::size_t>(count));
  S acc(0.0);
  for (int a = 0; a < count; ++a) {
    acc += q(first + a);
    phi[static_cast<std::size_t>(a)] = acc;
  }
  return phi;
}

}  // namespace detail

struct PlanarArmModel {
  std::string name = "example2";
  int dof = 3;
  int output_dim = 2;
  VectorXd length = VectorXd::Ones(3);
  VectorXd com = VectorXd::Constant(3, 0.5);
  VectorXd mass = VectorXd::Ones(3);
  VectorXd rot = VectorXd::Ones(3);
  VectorXd viscous = VectorXd::Zero(3);

  template <class S>
  Eigen::Matrix<S, -1, -1> inertia(const Eigen::Matrix<S, -1, 1>& q) const {
    return detail::planar_chain_inertia<S>(detail::absolute_angles(q, 0, dof), length, com, mass, rot);
  }
  template <class S>
  S potential(const Eigen::Matrix<S, -1, 1>&) const { return S(0.0); }
  template <class S>
  Eigen::Matrix<S, -1, 1> output(const Eigen::Matrix<S, -1, 1>& q) const {
    using std::cos;
    using std::sin;
    const auto phi = detail::absolute_angles(q, 0, dof);
    Eigen::Matrix<S, -1, 1> y(2);
    y(0) = S(0.0);
    y(1) = S(0.0);
    for (int a = 0; a < dof; ++a) {
      y(0) += S(length(a)) * cos(phi[static_cast<std::size_t>(a)]);
      y(1) += S(length(a)) * sin(phi[static_cast<std::size_t>(a)]);
    }
    return y;
  }
  MatrixXd damping(const VectorXd&) const { return viscous.asDiagonal(); }
  MatrixXd input_matrix(const VectorXd&) const { return MatrixXd::Identity(dof, dof); }
  MatrixXd completion() const { return MatrixXd::Ones(1, dof); }
};

inline std::shared_ptr<LagrangianSystem<PlanarArmModel>> make_example2(const VectorXd& damping) {
  if (damping.size() != 3) throw Error(ErrorCode::parameter, "example2 needs three damping coefficients");
  if ((damping.array() < 0.0).any()) throw Error(ErrorCode::parameter, "damping must be non-negative");
  PlanarArmModel m;
  m.viscous = damping;
  return std::make_shared<LagrangianSystem<PlanarArmModel>>(m);
}

// ---------------------------------------------------------------------------
// Waist yaw joint carrying a three-link pitch chain; output is the tip in ℝ³.
// The numbers are synthetic (plausible desk-scale arm), not a model of any
// particular hardware.

struct WaistArmModel {
  std::string name = "cpm4";
  int dof = 4;
  int output_dim = 3;
  double base_height = 0.30;
  double waist_inertia = 0.05;
  double g = 9.81;
  VectorXd length = (VectorXd(3) << 0.45, 0.40, 0.30).finished();
  VectorXd com = (VectorXd(3) << 0.225, 0.20, 0.15).finished();
  VectorXd mass = (VectorXd(3) << 2.0, 1.5, 1.0).finished();
  VectorXd viscous = (VectorXd(4) << 2.0, 3.0, 2.5, 1.0).finished();
  // Generalized force per percent duty cycle; gains vary mildly with the
  // joint angle to mimic the linear-actuator lever geometry.
  VectorXd gain = (VectorXd(4) << 0.4, 1.0, 0.6, 0.25).finished();
  double gain_ripple = 0.1;
  // Reflected rotor inertia of the geared actuators.
  VectorXd armature = (VectorXd(4) << 0.5, 0.5, 0.5, 0.2).finished();

  VectorXd rod_inertia() const { return (mass.array() * length.array().square() / 12.0).matrix(); }

  template <class S>
  Eigen::Matrix<S, -1, -1> inertia(const Eigen::Matrix<S, -1, 1>& q) const {
    using std::cos;
    const auto phi = detail::absolute_angles(q, 1, 3);
    const VectorXd rot = rod_inertia();
    Eigen::Matrix<S, -1, -1> d(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) d(r, c) = S(0.0);
    S yaw(waist_inertia);
    S reach(0.0);
    for (int a = 0; a < 3; ++a) {
      const S ca = cos(phi[static_cast<std::size_t>(a)]);
      const S rho = reach + S(com(a)) * ca;
      yaw += S(mass(a)) * rho * rho + S(rot(a)) * ca * ca;
      reach += S(length(a)) * ca;
    }
    d(0, 0) = yaw;
    d.block(1, 1, 3, 3) = detail::planar_chain_inertia<S>(phi, length, com, mass, rot);
    for (int i = 0; i < 4; ++i) d(i, i) += S(armature(i));
    return d;
  }

  template <class S>
  S potential(const Eigen::Matrix<S, -1, 1>& q) const {
    using std::sin;
    const auto phi = detail::absolute_angles(q, 1, 3);
    S pe(0.0);
    S height(base_height);
    for (int a = 0; a < 3; ++a) {
      const S sa = sin(phi[static_cast<std::size_t>(a)]);
      pe += S(mass(a) * g) * (height + S(com(a)) * sa);
      height += S(length(a)) * sa;
    }
    return pe;
  }

  template <class S>
  Eigen::Matrix<S, -1, 1> output(const Eigen::Matrix<S, -1, 1>& q) const {
    using std::cos;
    using std::sin;
    const auto phi = detail::absolute_angles(q, 1, 3);
    S r(0.0);
    S z(base_height);
    for (int a = 0; a < 3; ++a) {
      r += S(length(a)) * cos(phi[static_cast<std::size_t>(a)]);
      z += S(length(a)) * sin(phi[static_cast<std::size_t>(a)]);
    }
    Eigen::Matrix<S, -1, 1> y(3);
    y(0) = r * cos(q(0));
    y(1) = r * sin(q(0));
    y(2) = z;
    return y;
  }

  MatrixXd damping(const VectorXd&) const { return viscous.asDiagonal(); }
  MatrixXd input_matrix(const VectorXd& q) const {
    VectorXd a(4);
    for (int i = 0; i < 4; ++i) a(i) = gain(i) * (1.0 + gain_ripple * std::cos(q(i)));
    return a.asDiagonal();
  }
  MatrixXd completion() const { return (MatrixXd(1, 4) << 0.0, 1.0, 1.0, 1.0).finished(); }
};

inline std::shared_ptr<LagrangianSystem<WaistArmModel>> make_cpm_like() {
  return std::make_shared<LagrangianSystem<WaistArmModel>>(WaistArmModel{});
}

inline SystemPtr make_system(const std::string& name, const VectorXd& params = {}) {
  if (name == "example1") {
    if (params.size() == 0) return make_example1(1, 1, 1, 1);
    if (params.size() != 4) throw Error(ErrorCode::invalid_config, "example1 takes [m1, m2, b1, b2]");
    return make_example1(params(0), params(1), params(2), params(3));
  }
  if (name == "example2") {
    if (params.size() == 0) return make_example2(VectorXd::Ones(3));
    return make_example2(params);
  }
  if (name == "cpm4") {
    if (params.size() != 0) throw Error(ErrorCode::invalid_config, "cpm4 takes no parameters");
    return make_cpm_like();
  }
  throw Error(ErrorCode::invalid_config, "unknown plant '" + name + "'");
}

}  // namespace spf

#endif  // SPF_DYNAMICS_HPP
