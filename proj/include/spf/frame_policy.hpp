#ifndef SPF_FRAME_POLICY_HPP
#define SPF_FRAME_POLICY_HPP

#include <vector>

#include <Eigen/Dense>

namespace spf {

enum class FrameMode {
  frenet_serret,    // Gram-Schmidt on σ', σ'', ..., σ^(p)
  planar_fallback,  // e₁ tangent, e₂ its 90° in-plane rotation, e₃ the plane normal (p = 3)
  line_fallback,    // e₁ tangent, remaining vectors from fixed completions
};

// How frames are built along a path. Fallback modes only require the curve
// to be regular.
//
// planar_fallback: fixed_vectors[0] is the plane normal (default +z). For
// p = 2 the single rotation of e₁ by +90° is used and no vector is needed.
// line_fallback: p-1 completion vectors, orthonormalized against e₁ in the
// given order.
struct FramePolicy {
  FrameMode mode = FrameMode::frenet_serret;
  std::vector<Eigen::VectorXd> fixed_vectors;

  static FramePolicy frenet_serret() { return {}; }
  static FramePolicy planar(Eigen::VectorXd normal = Eigen::Vector3d::UnitZ()) {
    return {FrameMode::planar_fallback, {std::move(normal)}};
  }
  static FramePolicy planar2d() { return {FrameMode::planar_fallback, {}}; }
  static FramePolicy line(std::vector<Eigen::VectorXd> completions) {
    return {FrameMode::line_fallback, std::move(completions)};
  }
};

inline const char* to_string(FrameMode mode) {
  switch (mode) {
    case FrameMode::frenet_serret: return "frenet_serret";
    case FrameMode::planar_fallback: return "planar_fallback";
    case FrameMode::line_fallback: return "line_fallback";
  }
  return "unknown";
}

}  // namespace spf

#endif  // SPF_FRAME_POLICY_HPP
