#ifndef SPF_DETAIL_JET_HPP
#define SPF_DETAIL_JET_HPP

#include <cmath>

#include <Eigen/Core>

namespace spf::detail {

// Truncated second-order Taylor number in one variable t: value, d/dt, d²/dt².
// Evaluating a scalar function on q + t·w yields the first and second
// directional derivatives along w in one pass.
struct Jet {
  double v = 0.0;
  double d = 0.0;
  double dd = 0.0;

  Jet() = default;
  Jet(double value) : v(value) {}  // NOLINT: implicit promotion of constants
  Jet(double value, double first, double second) : v(value), d(first), dd(second) {}

  static Jet variable(double value, double direction) { return {value, direction, 0.0}; }

  Jet& operator+=(const Jet& o) { v += o.v; d += o.d; dd += o.dd; return *this; }
  Jet& operator-=(const Jet& o) { v -= o.v; d -= o.d; dd -= o.dd; return *this; }
  Jet& operator*=(const Jet& o) { *this = *this * o; return *this; }
  Jet& operator/=(const Jet& o) { *this = *this / o; return *this; }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(const Jet& a) { return {-a.v, -a.d, -a.dd}; }
  friend Jet operator*(const Jet& a, const Jet& b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d, a.dd * b.v + 2.0 * a.d * b.d + a.v * b.dd};
  }
  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

  friend Jet reciprocal(const Jet& b) {
    const double r = 1.0 / b.v;
    return {r, -b.d * r * r, (2.0 * b.d * b.d - b.v * b.dd) * r * r * r};
  }
  friend Jet sin(const Jet& a) {
    const double s = std::sin(a.v), c = std::cos(a.v);
    return {s, c * a.d, c * a.dd - s * a.d * a.d};
  }
  friend Jet cos(const Jet& a) {
    const double s = std::sin(a.v), c = std::cos(a.v);
    return {c, -s * a.d, -s * a.dd - c * a.d * a.d};
  }
  friend Jet sqrt(const Jet& a) {
    const double r = std::sqrt(a.v);
    return {r, a.d / (2.0 * r), (2.0 * a.dd * a.v - a.d * a.d) / (4.0 * a.v * r)};
  }

  friend bool operator<(const Jet& a, const Jet& b) { return a.v < b.v; }
  friend bool operator>(const Jet& a, const Jet& b) { return a.v > b.v; }
  friend bool operator==(const Jet& a, const Jet& b) { return a.v == b.v; }
};

}  // namespace spf::detail

namespace Eigen {
template <>
struct NumTraits<spf::detail::Jet> : NumTraits<double> {
  using Real = spf::detail::Jet;
  using NonInteger = spf::detail::Jet;
  using Nested = spf::detail::Jet;
  using Literal = spf::detail::Jet;
  enum { IsComplex = 0, IsInteger = 0, IsSigned = 1, RequireInitialization = 1, ReadCost = 3, AddCost = 3, MulCost = 9 };
};
}  // namespace Eigen

#endif  // SPF_DETAIL_JET_HPP
