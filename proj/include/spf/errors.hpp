#ifndef SPF_ERRORS_HPP
#define SPF_ERRORS_HPP

#include <optional>
#include <stdexcept>
#include <string>

namespace spf {

enum class ErrorCode {
  degenerate_chord,
  fit_failure,
  domain,
  unsupported_order,
  irregular_curve,
  degenerate_frame,
  non_convergence,
  non_spd_inertia,
  parameter,
  singularity,
  near_singular_decoupling,
  divergence,
  invalid_config,
  io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::degenerate_chord: return "degenerate-chord";
    case ErrorCode::fit_failure: return "fit-failure";
    case ErrorCode::domain: return "domain";
    case ErrorCode::unsupported_order: return "unsupported-order";
    case ErrorCode::irregular_curve: return "irregular-curve";
    case ErrorCode::degenerate_frame: return "degenerate-frame";
    case ErrorCode::non_convergence: return "non-convergence";
    case ErrorCode::non_spd_inertia: return "non-spd-inertia";
    case ErrorCode::parameter: return "parameter";
    case ErrorCode::singularity: return "singularity";
    case ErrorCode::near_singular_decoupling: return "near-singular-decoupling";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library. `index` carries the offending segment,
// frame vector or joint when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::optional<int> index = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), index_(index) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<int> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<int> index_;
};

}  // namespace spf

#endif  // SPF_ERRORS_HPP
