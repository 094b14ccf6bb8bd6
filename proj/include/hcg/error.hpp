#ifndef HCG_ERROR_HPP
#define HCG_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace hcg {

enum class Errc {
  negative_flow,
  outside_domain,
  no_path,
  cap_not_converged,
  probability_leak,
  missing_portal_flow,
  inconsistent_flows,
  negative_path_flow,
  budget_exceeded,
  backtrack_budget_exceeded,
  no_convergence,
  parse_error,
  validation_error,
  missing_edge_time,
  invalid_argument,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::negative_flow: return "negative-flow";
    case Errc::outside_domain: return "t-outside-domain";
    case Errc::no_path: return "no-path-to-destination";
    case Errc::cap_not_converged: return "cap-exceeded-without-convergence";
    case Errc::probability_leak: return "probability-mass-leak";
    case Errc::missing_portal_flow: return "missing-flow-for-portal-edge";
    case Errc::inconsistent_flows: return "inconsistent-flows";
    case Errc::negative_path_flow: return "negative-path-flow";
    case Errc::budget_exceeded: return "budget-exceeded";
    case Errc::backtrack_budget_exceeded: return "backtrack-budget-exceeded";
    case Errc::no_convergence: return "no-convergence";
    case Errc::parse_error: return "parse-error";
    case Errc::validation_error: return "validation-error";
    case Errc::missing_edge_time: return "missing-edge-time";
    case Errc::invalid_argument: return "invalid-argument";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace hcg

#endif  // HCG_ERROR_HPP
