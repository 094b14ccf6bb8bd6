// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// the number of failures.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hcg/io.hpp"
#include "hcg/loading.hpp"
#include "hcg/oracle.hpp"
#include "hcg/solver.hpp"
#include "test_support.hpp"

using namespace hcg;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits.
constexpr double kGradRelTol = 1e-6;
constexpr double kGradStep = 1e-5;
constexpr double kOracleTol = 1e-10;
constexpr std::size_t kOraclePathBudget = 10000;
constexpr std::size_t kGumbelDraws = 1000000;
constexpr double kSigmas = 4.0;
constexpr double kFixedPointTol = 1e-4;
constexpr double kStrongDualityTol = 1e-8;
constexpr double kGapFloor = -1e-9;
constexpr double kSlopeMax = -1.8;
constexpr double kAlphaTol = 1e-12;
constexpr double kMassTol = 1e-12;

struct Outcome {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Every trace collected by the solver-based criteria, for the invariant check.
std::vector<std::pair<std::string, std::vector<StepRecord>>> g_traces;

void check_evals(const std::vector<StepRecord>& trace, double L0, Outcome& out, const std::string& name) {
  double L_obs = L0;
  for (const StepRecord& r : trace) {
    L_obs = std::max(L_obs, r.L);
    const double bound = 4.0 * static_cast<double>(r.iter) + 2.0 * std::log2(L_obs / L0) + 4.0;
    if (static_cast<double>(r.evals) > bound) {
      out.fail(name + ": N=" + std::to_string(r.evals) + " > " + fmt(bound) + " at k+1=" + std::to_string(r.iter));
      return;
    }
  }
}

// min 1/2 sum lambda_i (t_i - c_i)^2 + sum sigma*_i(t_i) with affine sigma.
class SeparableQuadratic {
 public:
  struct FirstOrder {
    double value;
    std::vector<double> gradient;
  };

  explicit SeparableQuadratic(std::uint64_t seed, std::size_t n = 20) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ul(0.1, 5.0), uc(0.0, 6.0), ua(0.5, 2.0), ub(0.2, 2.0);
    for (std::size_t i = 0; i < n; ++i) {
      lambda_.push_back(ul(rng));
      c_.push_back(uc(rng));
      costs_.emplace_back(AffineCost{ua(rng), ub(rng)});
    }
  }

  std::size_t dimension() const { return c_.size(); }
  double value(std::span<const double> t) const {
    double v = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) v += 0.5 * lambda_[i] * (t[i] - c_[i]) * (t[i] - c_[i]);
    return v;
  }
  FirstOrder first_order(std::span<const double> t) const {
    FirstOrder fo{value(t), std::vector<double>(t.size())};
    for (std::size_t i = 0; i < t.size(); ++i) fo.gradient[i] = lambda_[i] * (t[i] - c_[i]);
    return fo;
  }
  double prox(std::size_t i, double v, double s) const { return costs_[i].prox_conjugate(v, s); }
  double composite_value(std::span<const double> t) const {
    double v = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) v += costs_[i].conjugate_value(t[i]);
    return v;
  }

  double lipschitz() const { return *std::max_element(lambda_.begin(), lambda_.end()); }
  std::vector<double> start() const {
    std::vector<double> t;
    for (const auto& c : costs_) t.push_back(c.free_flow());
    return t;
  }
  // lambda (t - c) + (t - a) / b = 0 when c > a, else t = c.
  std::vector<double> minimizer() const {
    std::vector<double> t(c_.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto& p = std::get<AffineCost>(costs_[i].params());
      t[i] = c_[i] <= p.a ? c_[i] : (lambda_[i] * c_[i] * p.b + p.a) / (lambda_[i] * p.b + 1.0);
    }
    return t;
  }

 private:
  std::vector<double> lambda_, c_;
  std::vector<LinkCost> costs_;
};

Outcome rate_and_counts(bool counts_only, std::vector<std::pair<std::string, std::vector<StepRecord>>>* runs) {
  Outcome out;
  const std::vector<std::size_t> checkpoints = {10, 30, 100, 300, 1000};
  double worst_ratio = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const SeparableQuadratic p(seed);
    const auto t_star = p.minimizer();
    const double phi_star = p.value(t_star) + p.composite_value(t_star);
    const auto t0 = p.start();
    double R2 = 0.0;
    for (std::size_t i = 0; i < t0.size(); ++i) R2 += 0.5 * (t0[i] - t_star[i]) * (t0[i] - t_star[i]);
    const double Lf = p.lipschitz();
    for (double L0 : {Lf, 1.0, 0.01}) {
      SolverConfig cfg;
      cfg.L0 = L0;
      cfg.max_iters = 1000;
      auto observer = [&](const AcceptedStep<SeparableQuadratic::FirstOrder>& s) {
        const std::size_t T = s.record.iter;
        if (std::find(checkpoints.begin(), checkpoints.end(), T) != checkpoints.end()) {
          const double excess = s.smooth_at_y + s.composite_at_y - phi_star;
          const double bound = 4.0 * Lf * R2 / (double(T) * double(T));
          worst_ratio = std::max(worst_ratio, excess / bound);
          if (!counts_only && excess > bound) {
            out.fail("seed " + std::to_string(seed) + " L0=" + fmt(L0) + " T=" + std::to_string(T) + ": " +
                     fmt(excess) + " > " + fmt(bound));
          }
        }
        return false;
      };
      const MethodResult r = accelerated_composite_minimize(p, cfg, t0, observer);
      const std::string name = "quadratic seed " + std::to_string(seed) + " L0=" + fmt(L0);
      if (counts_only) check_evals(r.trace, L0, out, name);
      if (runs) runs->emplace_back(name, r.trace);
    }
  }
  if (out.ok && !counts_only) out.detail = "max (phi - phi*) / bound = " + fmt(worst_ratio);
  return out;
}

SolveOutcome two_edge_solve() {
  const Network net = hcg::testing::load_fixture("two_edge.json");
  SolverConfig cfg;
  cfg.max_iters = 5000;
  return solve(net, cfg);
}

Outcome criterion_1() { return rate_and_counts(false, &g_traces); }

Outcome criterion_2() {
  Outcome out = rate_and_counts(true, nullptr);
  const SolveOutcome eq = two_edge_solve();
  check_evals(eq.trace, SolverConfig{}.L0, out, "two_edge");
  g_traces.emplace_back("two_edge", eq.trace);
  if (out.ok) out.detail = "9 quadratic runs + two_edge (" + std::to_string(eq.trace.back().evals) + " evals)";
  return out;
}

Outcome criterion_3() {
  Outcome out;
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    NetworkHierarchy h = hcg::testing::random_hierarchy(seed);
    for (double& g : h.gammas) g = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
    const Network net(h);
    const auto t = hcg::testing::random_times(net, seed + 500);
    const auto f = network_loading(net, t).plain_flows(net);
    for (std::size_t i = 0; i < t.size(); ++i) {
      auto tp = t;
      auto tm = t;
      tp[i] += kGradStep;
      tm[i] -= kGradStep;
      const double fd = (dual_smooth_value(net, tp) - dual_smooth_value(net, tm)) / (2 * kGradStep);
      const double rel = std::abs(fd + f[i]) / std::max(1.0, std::abs(f[i]));
      worst = std::max(worst, rel);
      ++checked;
      if (rel > kGradRelTol) out.fail("seed " + std::to_string(seed) + " edge " + std::to_string(i) + ": " + fmt(rel));
    }
  }
  if (out.ok) out.detail = std::to_string(checked) + " partials, max rel err " + fmt(worst);
  return out;
}

Outcome criterion_4() {
  Outcome out;
  double worst = 0.0;
  std::size_t nets = 0;
  auto compare = [&](const Network& net, const std::string& name, std::uint64_t seed) {
    double expanded = 0.0;
    for (std::size_t j = 0; j < net.level(0).od_origin.size(); ++j) {
      expanded += oracle::expanded_path_count(net, 0, j, kOraclePathBudget);
    }
    if (expanded > double(kOraclePathBudget)) return;
    ++nets;
    for (const DualPoint& t : {net.free_flow_times(), hcg::testing::random_times(net, seed)}) {
      const auto dp = network_loading(net, t);
      const auto pl = oracle::path_loading(net, t, kOraclePathBudget);
      for (std::size_t k = 0; k < net.level_count(); ++k) {
        for (std::size_t e = 0; e < dp.flows[k].size(); ++e) {
          const double diff = std::abs(dp.flows[k][e] - pl.flows[k][e]);
          worst = std::max(worst, diff);
          if (diff > kOracleTol * (1.0 + std::abs(pl.flows[k][e]))) {
            out.fail(name + " level " + std::to_string(k + 1) + " edge " + net.edge(k, e).id + ": " + fmt(diff));
          }
        }
      }
    }
  };
  for (const auto& name : hcg::testing::fixture_names()) compare(hcg::testing::load_fixture(name), name, 3);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    compare(Network(hcg::testing::random_hierarchy(seed)), "random " + std::to_string(seed), seed);
  }
  if (out.ok) out.detail = std::to_string(nets) + " networks, max |dp - theta x| " + fmt(worst);
  return out;
}

Outcome criterion_5() {
  Outcome out;
  struct Case {
    std::vector<double> costs;
    double gamma;
  };
  const std::vector<Case> cases = {{{1.0, 1.0}, 1.0},
                                   {{0.0, std::log(2.0)}, 1.0},
                                   {{0.3, 1.7, 0.9}, 0.7},
                                   {{2.0, 2.5, 1.0, 3.0}, 1.5},
                                   {{0.0, 0.2, 0.4}, 0.2}};
  double worst_z = 0.0;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& cs = cases[c];
    const auto mc = oracle::gumbel_monte_carlo(cs.costs, cs.gamma, kGumbelDraws, 17 + c);
    const auto p = oracle::logit_shares(cs.costs, cs.gamma, 1.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double sigma = std::sqrt(p[i] * (1.0 - p[i]) / double(kGumbelDraws));
      const double z = std::abs(mc.shares[i] - p[i]) / sigma;
      worst_z = std::max(worst_z, z);
      if (z > kSigmas) out.fail("case " + std::to_string(c) + " share " + std::to_string(i) + ": " + fmt(z) + " sigma");
    }
    const double gamma_psi = -oracle::softmin(cs.costs, cs.gamma);
    const double z = std::abs(mc.mean_max - gamma_psi) / mc.std_error;
    worst_z = std::max(worst_z, z);
    if (z > kSigmas) out.fail("case " + std::to_string(c) + " E max: " + fmt(z) + " standard errors");
  }
  if (out.ok) out.detail = "5 cases x 1e6 draws, worst deviation " + fmt(worst_z) + " sigma";
  return out;
}

Outcome criterion_6() {
  Outcome out;
  const Network net = hcg::testing::load_fixture("two_edge.json");
  SolverConfig cfg;
  cfg.max_iters = 5000;
  const EquilibriumProblem problem(net);

  // Mirror of solve() that also keeps averaged path flows, for the exact gap at every iteration.
  std::vector<double> wf(2, 0.0), wx(2, 0.0);
  double mass = 0.0;
  double min_gap = kInf;
  std::size_t iterations = 0;
  GapCertificate last;
  std::vector<std::vector<double>> avg_flows;
  auto observer = [&](const AcceptedStep<EquilibriumProblem::FirstOrder>& s) {
    const double a = s.record.alpha;
    const auto pl = oracle::path_loading(net, s.x);
    for (std::size_t e = 0; e < 2; ++e) wf[e] += a * s.at_x.load.flows[0][e];
    for (std::size_t p = 0; p < 2; ++p) wx[p] += a * pl.table.levels[0][0][p].flow;
    mass += a;
    avg_flows = {{wf[0] / mass, wf[1] / mass}};
    PathFlowTable xbar = pl.table;
    for (std::size_t p = 0; p < 2; ++p) xbar.levels[0][0][p].flow = wx[p] / mass;
    last = duality_gap(net, avg_flows, xbar, s.y, s.record.iter);
    min_gap = std::min(min_gap, last.gap);
    iterations = s.record.iter;
    return last.gap <= cfg.gap_tol;
  };
  const MethodResult r = accelerated_composite_minimize(problem, cfg, net.free_flow_times(), observer);
  g_traces.emplace_back("two_edge exact-gap run", r.trace);

  if (!r.stopped) out.fail("gap_tol not reached in " + std::to_string(cfg.max_iters) + " iterations");
  if (min_gap < kGapFloor) out.fail("duality gap " + fmt(min_gap) + " below " + fmt(kGapFloor));
  const double sd = std::abs(dual_objective(net, r.y) + last.primal_value);
  if (sd > kStrongDualityTol) out.fail("|dual + primal| = " + fmt(sd));

  const SolveOutcome sol = two_edge_solve();
  for (const auto& rec : sol.history) {
    if (rec.gap < kGapFloor) out.fail("recorded gap " + fmt(rec.gap) + " at T=" + std::to_string(rec.iter));
  }
  const auto fp = oracle::fixed_point_small(net, 1e-12);
  double dev = 0.0;
  for (std::size_t e = 0; e < 2; ++e) {
    dev = std::max(dev, std::abs(sol.avg_flows[0][e] - fp.flows[0][e]));
    dev = std::max(dev, std::abs(avg_flows[0][e] - fp.flows[0][e]));
  }
  if (dev > kFixedPointTol) out.fail("flows differ from fixed point by " + fmt(dev));
  if (out.ok) {
    out.detail = "T=" + std::to_string(iterations) + ", |dual + primal| " + fmt(sd) + ", min gap " + fmt(min_gap) +
                 ", |f - f_fp| " + fmt(dev);
  }
  return out;
}

Outcome criterion_7() {
  Outcome out;
  const Network net = hcg::testing::load_fixture("two_level.json");
  SolverConfig cfg;
  cfg.max_iters = 1000;
  cfg.gap_tol = 0.0;
  const SolveOutcome sol = solve(net, cfg);
  g_traces.emplace_back("two_level", sol.trace);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (const auto& rec : sol.history) {
    if (rec.iter < 10 || rec.iter > 1000) continue;
    if (!(rec.gap > 0.0)) {
      out.fail("nonpositive gap " + fmt(rec.gap) + " at T=" + std::to_string(rec.iter));
      return out;
    }
    const double x = std::log(double(rec.iter));
    const double y = std::log(rec.gap);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    n += 1;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (!(slope <= kSlopeMax)) out.fail("slope " + fmt(slope) + " > " + fmt(kSlopeMax));
  out.detail = "slope " + fmt(slope) + " over " + std::to_string(int(n)) + " iterations, final gap " +
               fmt(sol.history.back().gap);
  return out;
}

Outcome criterion_8() {
  Outcome out;
  std::size_t steps = 0;
  for (const auto& [name, trace] : g_traces) {
    double L_max = 0.0;
    for (const StepRecord& r : trace) {
      ++steps;
      L_max = std::max(L_max, r.L);
      const std::string at = name + " k+1=" + std::to_string(r.iter);
      if (std::abs(r.A - r.alpha - r.A_prev) > kAlphaTol * (1.0 + r.A_prev)) out.fail(at + ": alpha recursion");
      if (!(r.tau >= 0.0 && r.tau <= 1.0)) out.fail(at + ": tau " + fmt(r.tau));
      if (std::abs(r.alpha_sum / r.A - 1.0) > kMassTol) out.fail(at + ": averaging mass " + fmt(r.alpha_sum / r.A));
      const double k1 = double(r.iter);
      if (r.A * (1.0 + 1e-12) < k1 * k1 / (8.0 * L_max)) out.fail(at + ": A growth");
    }
  }
  if (g_traces.empty()) out.fail("no traces collected");
  if (out.ok) out.detail = std::to_string(g_traces.size()) + " runs, " + std::to_string(steps) + " iterations";
  return out;
}

int run(const std::string& args) {
  const std::string cmd = std::string(HCG_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_9() {
  Outcome out;
  const fs::path base = fs::temp_directory_path() / ("hcg_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  const std::string common =
      "solve --network " + hcg::testing::fixture("two_level.json") + " --config " + hcg::testing::fixture("two_level_config.json");
  const int a = run(common + " --out " + (base / "a").string());
  const int b = run(common + " --out " + (base / "b").string());
  if (a != b || (a != 0 && a != 1)) out.fail("exit codes " + std::to_string(a) + ", " + std::to_string(b));
  for (const char* file : {"flows.csv", "certificate.json", "history.csv"}) {
    const std::string x = io::read_file((base / "a" / file).string());
    const std::string y = io::read_file((base / "b" / file).string());
    if (x.empty() || x != y) out.fail(std::string(file) + " differs");
  }
  fs::remove_all(base);
  if (out.ok) out.detail = "flows.csv, certificate.json, history.csv identical";
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "rate inequality on separable quadratic", 10, criterion_1},
      {2, "oracle-count bound", 10, criterion_2},
      {3, "gradient identity on random networks", 30, criterion_3},
      {4, "DP loading equals path oracle", 30, criterion_4},
      {5, "Gumbel Monte-Carlo limit", 60, criterion_5},
      {6, "two-edge equilibrium and strong duality", 5, criterion_6},
      {7, "gap decay slope on two_level", 60, criterion_7},
      {8, "alpha recursion and averaging invariants", 1e9, criterion_8},
      {9, "byte-identical solve outputs", 1e9, criterion_9},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double elapsed = seconds_since(t0);
    if (elapsed > c.limit_s) o.fail("took " + fmt(elapsed) + " s (limit " + fmt(c.limit_s) + " s)");
    std::printf("%s criterion %d: %s [%.2f s] %s\n", o.ok ? "PASS" : "FAIL", c.id, c.name, elapsed, o.detail.c_str());
    std::fflush(stdout);
    if (!o.ok) ++failures;
  }
  return failures;
}
