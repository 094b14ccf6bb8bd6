#ifndef HCG_COSTS_HPP
#define HCG_COSTS_HPP

// Link cost families tau(f), their integrals sigma(f) = int_0^f tau, the
// conjugates sigma*(t) = sup_{f >= 0} { f t - sigma(f) } and the scalar prox
// of sigma* used by the composite solver.

#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>

#include "hcg/error.hpp"

namespace hcg {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// tau(f) = t0
struct ConstantCost {
  double t0;
  friend bool operator==(const ConstantCost&, const ConstantCost&) = default;
};

/// tau(f) = a + b f
struct AffineCost {
  double a;
  double b;
  friend bool operator==(const AffineCost&, const AffineCost&) = default;
};

/// BPR form: tau(f) = t0 (1 + beta (f / cap)^mu)
struct PowerCost {
  double t0;
  double beta;
  double cap;
  double mu;
  friend bool operator==(const PowerCost&, const PowerCost&) = default;
};

/// Interval on which sigma* is finite.
struct DualDomain {
  double lower;
  double upper;
};

class LinkCost {
 public:
  using Params = std::variant<ConstantCost, AffineCost, PowerCost>;

  LinkCost(ConstantCost c) : params_(c) {  // NOLINT(google-explicit-constructor)
    if (!(c.t0 > 0.0) || !std::isfinite(c.t0)) {
      throw Error(Errc::invalid_argument, "constant cost requires t0 > 0");
    }
  }
  LinkCost(AffineCost c) : params_(c) {  // NOLINT(google-explicit-constructor)
    if (!(c.a >= 0.0) || !(c.b > 0.0) || !std::isfinite(c.a) || !std::isfinite(c.b)) {
      throw Error(Errc::invalid_argument, "affine cost requires a >= 0, b > 0");
    }
  }
  LinkCost(PowerCost c) : params_(c) {  // NOLINT(google-explicit-constructor)
    if (!(c.t0 > 0.0) || !(c.beta > 0.0) || !(c.cap > 0.0) || !(c.mu >= 1.0) ||
        !std::isfinite(c.t0) || !std::isfinite(c.beta) || !std::isfinite(c.cap) ||
        !std::isfinite(c.mu)) {
      throw Error(Errc::invalid_argument, "power cost requires t0 > 0, beta > 0, cap > 0, mu >= 1");
    }
  }

  const Params& params() const noexcept { return params_; }

  /// Free-flow time tau(0).
  double free_flow() const {
    return std::visit(
        [](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, AffineCost>) {
            return c.a;
          } else {
            return c.t0;
          }
        },
        params_);
  }

  DualDomain domain() const {
    if (std::holds_alternative<ConstantCost>(params_)) {
      return {-kInf, free_flow()};
    }
    return {free_flow(), kInf};
  }

  double travel_time(double f) const {
    check_flow(f);
    return std::visit(
        [f](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, ConstantCost>) {
            return c.t0;
          } else if constexpr (std::is_same_v<T, AffineCost>) {
            return c.a + c.b * f;
          } else {
            return c.t0 * (1.0 + c.beta * std::pow(f / c.cap, c.mu));
          }
        },
        params_);
  }

  double cost_integral(double f) const {
    check_flow(f);
    return std::visit(
        [f](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, ConstantCost>) {
            return c.t0 * f;
          } else if constexpr (std::is_same_v<T, AffineCost>) {
            return c.a * f + 0.5 * c.b * f * f;
          } else {
            return c.t0 * f + c.t0 * c.beta * c.cap / (c.mu + 1.0) * std::pow(f / c.cap, c.mu + 1.0);
          }
        },
        params_);
  }

  /// Inverse cost map: the f >= 0 with tau(f) = t, or 0 below free flow.
  double conjugate_derivative(double t) const {
    if (std::isnan(t)) {
      throw Error(Errc::outside_domain, "t is NaN");
    }
    return std::visit(
        [t](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, ConstantCost>) {
            if (t > c.t0) {
              throw Error(Errc::outside_domain,
                          "t = " + std::to_string(t) + " exceeds constant cost " + std::to_string(c.t0));
            }
            return 0.0;
          } else if constexpr (std::is_same_v<T, AffineCost>) {
            return t <= c.a ? 0.0 : (t - c.a) / c.b;
          } else {
            if (t <= c.t0) {
              return 0.0;
            }
            return c.cap * std::pow((t / c.t0 - 1.0) / c.beta, 1.0 / c.mu);
          }
        },
        params_);
  }

  /// sigma*(t); +inf outside the domain.
  double conjugate_value(double t) const {
    if (std::isnan(t)) {
      return kInf;
    }
    return std::visit(
        [this, t](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, ConstantCost>) {
            return t <= c.t0 ? 0.0 : kInf;
          } else if constexpr (std::is_same_v<T, AffineCost>) {
            return t <= c.a ? 0.0 : (t - c.a) * (t - c.a) / (2.0 * c.b);
          } else {
            if (t <= c.t0) {
              return 0.0;
            }
            const double f = conjugate_derivative(t);
            return f * t - cost_integral(f);
          }
        },
        params_);
  }

  /// argmin_t { (t - v)^2 / (2 step) + sigma*(t) }.
  double prox_conjugate(double v, double step) const {
    if (!(step > 0.0)) {
      throw Error(Errc::invalid_argument, "prox step must be positive");
    }
    const double lower = free_flow();
    if (v <= lower) {
      return v;
    }
    return std::visit(
        [&](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, ConstantCost>) {
            return c.t0;
          } else if constexpr (std::is_same_v<T, AffineCost>) {
            return (v * c.b + step * c.a) / (c.b + step);
          } else {
            return bisect_prox(v, step);
          }
        },
        params_);
  }

  friend bool operator==(const LinkCost&, const LinkCost&) = default;

 private:
  static void check_flow(double f) {
    if (!(f >= 0.0)) {
      throw Error(Errc::negative_flow, "flow " + std::to_string(f) + " is negative");
    }
  }

  // Root of t - v + step * sigma*'(t) on [tau(0), v]; the left side is
  // strictly increasing there, negative at tau(0) and nonnegative at v.
  double bisect_prox(double v, double step) const {
    double lo = free_flow();
    double hi = v;
    auto residual = [&](double t) { return t - v + step * conjugate_derivative(t); };
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) {
        break;
      }
      const double r = residual(mid);
      if (r == 0.0) {
        return mid;
      }
      (r < 0.0 ? lo : hi) = mid;
    }
    return std::abs(residual(lo)) <= std::abs(residual(hi)) ? lo : hi;
  }

  Params params_;
};

}  // namespace hcg

#endif  // HCG_COSTS_HPP
