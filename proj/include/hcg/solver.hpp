#ifndef HCG_SOLVER_HPP
#define HCG_SOLVER_HPP

// Adaptive accelerated composite gradient method with a Euclidean prox setup,
// and its use on the equilibrium dual problem with primal averaging and a
// computable duality-gap certificate.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "hcg/error.hpp"
#include "hcg/loading.hpp"
#include "hcg/net_model.hpp"

namespace hcg {

struct SolverConfig {
  double L0 = 1.0;
  std::size_t max_iters = 10000;
  double gap_tol = 1e-8;
  std::size_t max_backtracks_per_iter = 60;
  std::uint64_t seed = 0;  // reserved for test harnesses; the method is deterministic

  void check() const {
    if (!(L0 > 0.0) || !std::isfinite(L0)) throw Error(Errc::invalid_argument, "L0 must be positive");
    if (max_iters < 1) throw Error(Errc::invalid_argument, "max_iters must be at least 1");
    if (!(gap_tol >= 0.0)) throw Error(Errc::invalid_argument, "gap_tol must be nonnegative");
  }
};

struct AlphaStep {
  double alpha;  // alpha_{k+1}
  double tau;    // mixing weight 1 / (alpha_{k+1} L_{k+1})
};

/// alpha_{k+1} = sqrt(alpha_k^2 L_k / L_{k+1} + 1 / (4 L_{k+1}^2)) + 1 / (2 L_{k+1}),
/// so that alpha_{k+1}^2 L_{k+1} - alpha_{k+1} = alpha_k^2 L_k.
inline AlphaStep alpha_step(double alpha_k, double L_k, double L_next) {
  const double alpha = std::sqrt(alpha_k * alpha_k * L_k / L_next + 1.0 / (4.0 * L_next * L_next)) + 0.5 / L_next;
  return {alpha, std::min(1.0, 1.0 / (alpha * L_next))};
}

template <class R>
concept FirstOrderResult = requires(const R& r) {
  { r.value } -> std::convertible_to<double>;
  { r.gradient } -> std::convertible_to<std::span<const double>>;
};

/// min f(x) + Psi(x) with smooth f and separable Psi = sum_i psi_i(x_i).
template <class P>
concept CompositeProblem = requires(const P& p, std::span<const double> x, std::size_t i, double v, double s) {
  { p.dimension() } -> std::convertible_to<std::size_t>;
  { p.value(x) } -> std::convertible_to<double>;
  { p.first_order(x) } -> FirstOrderResult;
  { p.prox(i, v, s) } -> std::convertible_to<double>;  // argmin_u (u - v)^2 / (2 s) + psi_i(u)
  { p.composite_value(x) } -> std::convertible_to<double>;
};

/// State after one accepted iteration.
struct StepRecord {
  std::size_t iter = 0;        // k + 1
  double L = 0.0;              // accepted L_{k+1}
  double alpha = 0.0;          // alpha_{k+1}
  double tau = 0.0;            // mixing weight used for x_{k+1}
  double A_prev = 0.0;         // alpha_k^2 L_k
  double A = 0.0;              // alpha_{k+1}^2 L_{k+1}
  double alpha_sum = 0.0;      // sum_{i <= k+1} alpha_i
  std::size_t evals = 0;       // cumulative evaluations of f
  std::size_t backtracks = 0;  // doublings in this iteration
};

template <class FirstOrder>
struct AcceptedStep {
  const StepRecord& record;
  std::span<const double> x;  // x_{k+1}
  std::span<const double> y;  // y_{k+1}
  std::span<const double> z;  // z_{k+1}
  const FirstOrder& at_x;     // oracle output at x_{k+1}
  double smooth_at_y;         // f(y_{k+1})
  double composite_at_y;      // Psi(y_{k+1})
};

struct MethodResult {
  std::vector<double> y;
  std::vector<StepRecord> trace;
  std::size_t evals = 0;
  bool stopped = false;  // observer asked to stop
};

/// Composite gradient step: argmin_y <g, y - x> + L/2 |y - x|^2 + Psi(y).
template <CompositeProblem P>
std::vector<double> gradient_step(const P& p, std::span<const double> x, std::span<const double> grad, double L) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = p.prox(i, x[i] - grad[i] / L, 1.0 / L);
  return y;
}

/// Mirror step with V_z(y) = |y - z|^2 / 2: argmin_y <g, y - z> + V_z(y) / alpha + Psi(y).
template <CompositeProblem P>
std::vector<double> mirror_step(const P& p, std::span<const double> z, std::span<const double> grad, double alpha) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = p.prox(i, z[i] - alpha * grad[i], alpha);
  return out;
}

/// f(y) <= f(x) + <g, y - x> + L/2 |y - x|^2, with slack 1e-12 (1 + |f(x)|) for rounding.
inline bool descent_test(double fx, std::span<const double> grad, std::span<const double> x,
                         std::span<const double> y, double fy, double L) {
  double lin = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = y[i] - x[i];
    lin += grad[i] * d;
    sq += d * d;
  }
  return fy <= fx + lin + 0.5 * L * sq + 1e-12 * (1.0 + std::abs(fx));
}

/// Runs the method from x0 for at most cfg.max_iters iterations. After every
/// accepted iteration `observer(const AcceptedStep<...>&)` is called; a true
/// return stops the run.
template <CompositeProblem P, class Observer>
MethodResult accelerated_composite_minimize(const P& p, const SolverConfig& cfg, std::vector<double> x0,
                                            Observer&& observer) {
  cfg.check();
  if (x0.size() != p.dimension()) throw Error(Errc::invalid_argument, "start point has the wrong dimension");

  MethodResult result;
  std::vector<double> y = x0;
  std::vector<double> z = std::move(x0);
  std::vector<double> x(y.size());
  double alpha = 0.0;
  double L = cfg.L0;
  double alpha_sum = 0.0;

  for (std::size_t k = 0; k < cfg.max_iters; ++k) {
    double L_next = std::max(cfg.L0, L / 2.0);
    std::size_t backtracks = 0;
    while (true) {
      const AlphaStep step = alpha_step(alpha, L, L_next);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = step.tau * z[i] + (1.0 - step.tau) * y[i];
      auto at_x = p.first_order(std::span<const double>(x));
      ++result.evals;
      std::span<const double> grad(at_x.gradient);
      std::vector<double> y_next = gradient_step(p, x, grad, L_next);
      const double fy = p.value(std::span<const double>(y_next));
      ++result.evals;
      if (descent_test(at_x.value, grad, x, y_next, fy, L_next)) {
        z = mirror_step(p, z, grad, step.alpha);
        y = std::move(y_next);
        StepRecord rec;
        rec.iter = k + 1;
        rec.L = L_next;
        rec.alpha = step.alpha;
        rec.tau = step.tau;
        rec.A_prev = alpha * alpha * L;
        rec.A = step.alpha * step.alpha * L_next;
        alpha_sum += step.alpha;
        rec.alpha_sum = alpha_sum;
        rec.evals = result.evals;
        rec.backtracks = backtracks;
        alpha = step.alpha;
        L = L_next;
        result.trace.push_back(rec);
        const AcceptedStep<decltype(at_x)> accepted{result.trace.back(), x, y, z, at_x, fy, p.composite_value(y)};
        if (observer(accepted)) {
          result.stopped = true;
          result.y = std::move(y);
          return result;
        }
        break;
      }
      if (backtracks == cfg.max_backtracks_per_iter) {
        throw Error(Errc::backtrack_budget_exceeded,
                    "descent test failed after " + std::to_string(backtracks) + " doublings of L (L = " +
                        std::to_string(L_next) + ")");
      }
      L_next *= 2.0;
      ++backtracks;
    }
  }
  result.y = std::move(y);
  return result;
}

/// The equilibrium dual: smooth part gamma^1 psi^1(t / gamma^1), composite part sum_e sigma*_e(t_e).
class EquilibriumProblem {
 public:
  struct FirstOrder {
    double value = 0.0;
    std::vector<double> gradient;
    LoadResult load;
  };

  explicit EquilibriumProblem(const Network& net) : net_(net) {}

  const Network& network() const noexcept { return net_; }
  std::size_t dimension() const noexcept { return net_.plain_edge_count(); }
  double value(std::span<const double> t) const { return dual_smooth_value(net_, t); }

  FirstOrder first_order(std::span<const double> t) const {
    FirstOrder out;
    out.load = network_loading(net_, t);
    out.value = out.load.psi1;
    out.gradient = out.load.plain_flows(net_);
    for (double& g : out.gradient) g = -g;
    return out;
  }

  double prox(std::size_t i, double v, double step) const { return net_.cost(i).prox_conjugate(v, step); }

  double composite_value(std::span<const double> t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += net_.cost(i).conjugate_value(t[i]);
    return s;
  }

 private:
  const Network& net_;
};

struct GradMapResult {
  DualPoint y;
  double fy;
  bool accepted;
};

/// One prox-gradient step on the dual at point x with estimate L, plus the descent test.
inline GradMapResult grad_map(const Network& net, std::span<const double> x, double L, std::span<const double> grad,
                              double fx) {
  if (!(L > 0.0)) throw Error(Errc::invalid_argument, "L must be positive");
  const EquilibriumProblem problem(net);
  GradMapResult r;
  r.y = gradient_step(problem, x, grad, L);
  r.fy = problem.value(r.y);
  r.accepted = descent_test(fx, grad, x, r.y, r.fy, L);
  return r;
}

inline DualPoint mirror_map(const Network& net, std::span<const double> z, std::span<const double> grad,
                            double alpha) {
  if (!(alpha > 0.0)) throw Error(Errc::invalid_argument, "alpha must be positive");
  return mirror_step(EquilibriumProblem(net), z, grad, alpha);
}

struct IterationRecord {
  std::size_t iter = 0;
  double L_used = 0.0;
  std::size_t n_func_evals = 0;
  double dual_value = 0.0;  // at y_k
  double gap = 0.0;
  double wall_time = 0.0;  // seconds since the start of solve
};

struct GapCertificate {
  double dual_value = 0.0;
  double primal_value = 0.0;
  double gap = 0.0;
  std::size_t T = 0;
};

struct SolveOutcome {
  DualPoint t_final;  // y_T
  GapCertificate certificate;
  std::vector<IterationRecord> history;
  std::vector<StepRecord> trace;
  std::vector<std::vector<double>> avg_flows;  // alpha-weighted averages, [level][edge]
  std::vector<double> avg_entropy;             // alpha-weighted level entropies
  bool converged = false;                      // gap <= gap_tol
};

/// Called with (alpha_{k+1}, x_{k+1}) after each accepted iteration.
using AveragingHook = std::function<void(double, std::span<const double>)>;

/// Path-free primal value: sum_e sigma_e(avg f_e) + sum_k gamma^k * avg entropy^k.
/// By convexity of the entropy term this is an upper bound on Psi(avg x, avg f).
inline double averaged_primal_value(const Network& net, const std::vector<std::vector<double>>& avg_flows,
                                    std::span<const double> avg_entropy) {
  double value = 0.0;
  for (std::size_t i = 0; i < net.plain_edge_count(); ++i) {
    const PlainEdgeRef r = net.plain_edges()[i];
    value += net.cost(i).cost_integral(std::max(0.0, avg_flows[r.level][r.edge]));
  }
  for (std::size_t k = 0; k < net.level_count(); ++k) value += net.gamma(k) * avg_entropy[k];
  return value;
}

inline SolveOutcome solve(const Network& net, const SolverConfig& cfg, DualPoint t0 = {},
                          const AveragingHook& on_accept = {}) {
  if (t0.empty()) t0 = net.free_flow_times();
  check_dual_point(net, t0);
  for (std::size_t i = 0; i < t0.size(); ++i) {
    const DualDomain dom = net.cost(i).domain();
    if (t0[i] > dom.upper) throw Error(Errc::outside_domain, "start point outside dom sigma* on '" + net.plain_edge(i).id + "'");
  }

  const EquilibriumProblem problem(net);
  const std::size_t m = net.level_count();
  SolveOutcome out;
  std::vector<std::vector<double>> weighted_flows(m);
  for (std::size_t k = 0; k < m; ++k) weighted_flows[k].assign(net.level(k).edge_from.size(), 0.0);
  std::vector<double> weighted_entropy(m, 0.0);
  out.avg_flows = weighted_flows;
  out.avg_entropy = weighted_entropy;
  const auto start = std::chrono::steady_clock::now();

  auto observer = [&](const AcceptedStep<EquilibriumProblem::FirstOrder>& s) {
    const double a = s.record.alpha;
    const LoadResult& load = s.at_x.load;
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t e = 0; e < weighted_flows[k].size(); ++e) weighted_flows[k][e] += a * load.flows[k][e];
      weighted_entropy[k] += a * load.entropy[k];
    }
    const double mass = s.record.alpha_sum;
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t e = 0; e < weighted_flows[k].size(); ++e) out.avg_flows[k][e] = weighted_flows[k][e] / mass;
      out.avg_entropy[k] = weighted_entropy[k] / mass;
    }
    if (on_accept) on_accept(a, s.x);

    GapCertificate& c = out.certificate;
    c.dual_value = s.smooth_at_y + s.composite_at_y;
    c.primal_value = averaged_primal_value(net, out.avg_flows, out.avg_entropy);
    c.gap = c.dual_value + c.primal_value;
    c.T = s.record.iter;

    IterationRecord rec;
    rec.iter = s.record.iter;
    rec.L_used = s.record.L;
    rec.n_func_evals = s.record.evals;
    rec.dual_value = c.dual_value;
    rec.gap = c.gap;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.history.push_back(rec);
    return c.gap <= cfg.gap_tol;
  };

  MethodResult res = accelerated_composite_minimize(problem, cfg, std::move(t0), observer);
  out.t_final = std::move(res.y);
  out.trace = std::move(res.trace);
  out.converged = out.certificate.gap <= cfg.gap_tol;
  return out;
}

/// Duality gap with an explicit averaged path table: dual_objective(y_T) + Psi(avg x, avg f).
inline GapCertificate duality_gap(const Network& net, const std::vector<std::vector<double>>& avg_flows,
                                  const PathFlowTable& avg_paths, std::span<const double> y_T, std::size_t T = 0) {
  GapCertificate c;
  c.dual_value = dual_objective(net, y_T);
  c.primal_value = primal_objective(net, avg_paths, avg_flows);
  c.gap = c.dual_value + c.primal_value;
  c.T = T;
  return c;
}

/// (1 / min_k gamma^k) * sum_w d_w l_w^2, an a-priori bound on the Lipschitz
/// constant of the smooth dual part. Reported only; the method is adaptive.
inline double lipschitz_bound_diagnostic(const Network& net) {
  double gmin = kInf;
  for (std::size_t k = 0; k < net.level_count(); ++k) gmin = std::min(gmin, net.gamma(k));
  LongestPathBound bound(net);
  const auto demands = net.base_demands();
  double sum = 0.0;
  for (std::size_t j = 0; j < demands.size(); ++j) {
    const double l = static_cast<double>(bound(0, j));
    sum += demands[j] * l * l;
  }
  return sum / gmin;
}

}  // namespace hcg

#endif  // HCG_SOLVER_HPP
