#ifndef HCG_ORACLE_HPP
#define HCG_ORACLE_HPP

// Brute-force reference implementations for testing: explicit path sets,
// the logit distribution over them, Gumbel choice simulation and a damped
// fixed-point iteration. None of this shares code with the loading DP.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcg/costs.hpp"
#include "hcg/error.hpp"
#include "hcg/loading.hpp"
#include "hcg/net_model.hpp"

namespace hcg::oracle {

using Path = std::vector<std::size_t>;  // edge indices at one level

/// A level-1 path with every portal replaced, recursively, by a lower-level path.
struct ExpandedPath {
  std::vector<std::pair<std::string, std::size_t>> cost_terms;  // (edge id, zero-based level), plain edges only
  std::size_t total_plain_edges = 0;
};

/// All paths of `od` at `level` (walks of at most walk_cap edges on a cyclic
/// level), ordered lexicographically by edge-id sequence.
inline std::vector<Path> enumerate_paths(const Network& net, std::size_t level, std::size_t od,
                                         std::size_t budget = 10000) {
  const auto& L = net.level(level);
  const auto& edges = net.hierarchy().levels[level].edges;
  const std::size_t origin = L.od_origin.at(od);
  const std::size_t dest = L.od_destination.at(od);
  const std::size_t max_len = L.acyclic ? L.node_count : *net.walk_cap();

  std::vector<std::vector<std::size_t>> sorted_out(L.node_count);
  for (std::size_t v = 0; v < L.node_count; ++v) {
    sorted_out[v] = L.out_edges[v];
    std::sort(sorted_out[v].begin(), sorted_out[v].end(),
              [&](std::size_t a, std::size_t b) { return edges[a].id < edges[b].id; });
  }

  std::vector<Path> out;
  Path current;
  auto dfs = [&](auto&& self, std::size_t v) -> void {
    if (v == dest) {
      if (out.size() == budget) {
        throw Error(Errc::budget_exceeded, "more than " + std::to_string(budget) + " paths");
      }
      out.push_back(current);
      return;
    }
    if (current.size() == max_len) return;
    for (std::size_t e : sorted_out[v]) {
      current.push_back(e);
      self(self, L.edge_to[e]);
      current.pop_back();
    }
  };
  dfs(dfs, origin);
  return out;
}

/// Number of fully expanded paths of `od` at `level`.
inline double expanded_path_count(const Network& net, std::size_t level, std::size_t od,
                                  std::size_t budget = 10000) {
  const auto& L = net.level(level);
  double total = 0.0;
  for (const Path& p : enumerate_paths(net, level, od, budget)) {
    double n = 1.0;
    for (std::size_t e : p) {
      if (L.portal_target[e] != npos) n *= expanded_path_count(net, level + 1, L.portal_target[e], budget);
    }
    total += n;
  }
  return total;
}

/// Every fully expanded path of level-1 OD `od`.
inline std::vector<ExpandedPath> expand_paths(const Network& net, std::size_t level, std::size_t od,
                                              std::size_t budget = 10000) {
  const auto& L = net.level(level);
  std::vector<ExpandedPath> out;
  for (const Path& p : enumerate_paths(net, level, od, budget)) {
    std::vector<ExpandedPath> partial(1);
    for (std::size_t e : p) {
      if (L.portal_target[e] == npos) {
        for (auto& x : partial) {
          x.cost_terms.emplace_back(net.edge(level, e).id, level);
          ++x.total_plain_edges;
        }
        continue;
      }
      const auto lower = expand_paths(net, level + 1, L.portal_target[e], budget);
      std::vector<ExpandedPath> next;
      for (const auto& head : partial) {
        for (const auto& tail : lower) {
          ExpandedPath joined = head;
          joined.cost_terms.insert(joined.cost_terms.end(), tail.cost_terms.begin(), tail.cost_terms.end());
          joined.total_plain_edges += tail.total_plain_edges;
          next.push_back(std::move(joined));
        }
      }
      partial = std::move(next);
      if (partial.size() > budget) throw Error(Errc::budget_exceeded, "too many expanded paths");
    }
    out.insert(out.end(), partial.begin(), partial.end());
    if (out.size() > budget) throw Error(Errc::budget_exceeded, "too many expanded paths");
  }
  return out;
}

/// -gamma ln sum_i exp(-c_i / gamma) over an explicit list.
inline double softmin(std::span<const double> costs, double gamma) {
  const double lo = *std::min_element(costs.begin(), costs.end());
  double sum = 0.0;
  for (double c : costs) sum += std::exp(-(c - lo) / gamma);
  return lo - gamma * std::log(sum);
}

/// Path lengths g_p^k evaluated from explicit path lists, bottom-up.
class PathCosts {
 public:
  PathCosts(const Network& net, std::span<const double> t, std::size_t budget = 10000)
      : net_(net), t_(t.begin(), t.end()) {
    const std::size_t m = net.level_count();
    paths_.resize(m);
    od_length_.resize(m);
    for (std::size_t k = m; k-- > 0;) {
      const std::size_t n_od = net.level(k).od_origin.size();
      paths_[k].resize(n_od);
      od_length_[k].resize(n_od);
      for (std::size_t j = 0; j < n_od; ++j) {
        paths_[k][j] = enumerate_paths(net, k, j, budget);
        std::vector<double> costs;
        for (const Path& p : paths_[k][j]) costs.push_back(cost(k, p));
        od_length_[k][j] = softmin(costs, net.gamma(k));
      }
    }
  }

  /// g_p = sum of plain t_e + sum of portal soft-min lengths.
  double cost(std::size_t level, const Path& p) const {
    const auto& L = net_.level(level);
    double g = 0.0;
    for (std::size_t e : p) {
      g += L.dual_index[e] != npos ? t_[L.dual_index[e]] : od_length_[level + 1][L.portal_target[e]];
    }
    return g;
  }

  /// gamma^k psi^k_w(t / gamma^k) is minus this value.
  double od_length(std::size_t level, std::size_t od) const { return od_length_[level][od]; }
  const std::vector<Path>& paths(std::size_t level, std::size_t od) const { return paths_[level][od]; }

 private:
  const Network& net_;
  std::vector<double> t_;
  std::vector<std::vector<std::vector<Path>>> paths_;
  std::vector<std::vector<double>> od_length_;
};

inline double path_cost(const Network& net, std::span<const double> t, const Path& path, std::size_t level) {
  return PathCosts(net, t).cost(level, path);
}

/// x_p = d exp(-g_p / gamma) / sum_q exp(-g_q / gamma).
inline std::vector<double> logit_shares(std::span<const double> costs, double gamma, double demand) {
  const double lo = *std::min_element(costs.begin(), costs.end());
  std::vector<double> x(costs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] = std::exp(-(costs[i] - lo) / gamma));
  for (double& v : x) v = demand * v / sum;
  return x;
}

inline std::vector<PathFlow> logit_path_distribution(const PathCosts& pc, const Network& net, std::size_t level,
                                                     std::size_t od, double demand) {
  const auto& paths = pc.paths(level, od);
  std::vector<double> costs;
  for (const Path& p : paths) costs.push_back(pc.cost(level, p));
  const auto x = logit_shares(costs, net.gamma(level), demand);
  std::vector<PathFlow> row;
  for (std::size_t i = 0; i < paths.size(); ++i) row.push_back({paths[i], x[i]});
  return row;
}

/// Path table and its edge flows Theta x for all levels, with induced demands pushed top-down.
struct PathLoading {
  PathFlowTable table;
  std::vector<std::vector<double>> flows;  // [level][edge]
  std::vector<double> entropy;             // [level] sum x ln(x / d)
  double psi1 = 0.0;
};

inline PathLoading path_loading(const Network& net, std::span<const double> t, std::size_t budget = 10000) {
  const PathCosts pc(net, t, budget);
  const std::size_t m = net.level_count();
  PathLoading out;
  out.table.levels.resize(m);
  out.flows.resize(m);
  out.entropy.assign(m, 0.0);
  const auto base = net.base_demands();
  for (std::size_t k = 0; k < m; ++k) {
    const auto& L = net.level(k);
    out.flows[k].assign(L.edge_from.size(), 0.0);
    for (std::size_t j = 0; j < L.od_origin.size(); ++j) {
      const double d = k == 0 ? base[j] : out.flows[k - 1][L.od_binding[j]];
      auto row = logit_path_distribution(pc, net, k, j, d);
      for (const PathFlow& p : row) {
        for (std::size_t e : p.edges) out.flows[k][e] += p.flow;
        if (d > 0.0) out.entropy[k] += xlogx_ratio(p.flow, d);
      }
      out.table.levels[k].push_back(std::move(row));
    }
  }
  for (std::size_t j = 0; j < base.size(); ++j) out.psi1 -= base[j] * pc.od_length(0, j);
  return out;
}

struct MonteCarloResult {
  std::vector<double> shares;
  double mean_max = 0.0;   // sample mean of max_p { -g_p + xi_p }
  double std_error = 0.0;  // of mean_max
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform on (0, 1) from the (seed, counter) pair.
inline double uniform_open(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t bits = splitmix64(splitmix64(seed) ^ counter) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

inline constexpr double kEulerGamma = 0.57721566490153286061;

}  // namespace detail

/// Gumbel draw with CDF exp(-exp(-z / gamma - E)), mean zero.
inline double gumbel(double gamma, std::uint64_t seed, std::uint64_t counter) {
  const double u = detail::uniform_open(seed, counter);
  return -gamma * (std::log(-std::log(u)) + detail::kEulerGamma);
}

/// Each of n_samples users picks argmax_p { -g_p + xi_p } with iid Gumbel noise.
inline MonteCarloResult gumbel_monte_carlo(std::span<const double> costs, double gamma, std::size_t n_samples,
                                           std::uint64_t seed) {
  if (n_samples == 0 || costs.empty()) throw Error(Errc::invalid_argument, "need samples and alternatives");
  const std::size_t n = costs.size();
  std::vector<std::size_t> hits(n, 0);
  double sum = 0.0;
  double sum_sq = 0.0;
  std::uint64_t counter = 0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::size_t best = 0;
    double best_value = -kInf;
    for (std::size_t p = 0; p < n; ++p) {
      const double v = -costs[p] + gumbel(gamma, seed, counter++);
      if (v > best_value) {
        best_value = v;
        best = p;
      }
    }
    ++hits[best];
    sum += best_value;
    sum_sq += best_value * best_value;
  }
  MonteCarloResult r;
  const double ns = static_cast<double>(n_samples);
  for (std::size_t h : hits) r.shares.push_back(static_cast<double>(h) / ns);
  r.mean_max = sum / ns;
  const double var = n_samples > 1 ? (sum_sq - ns * r.mean_max * r.mean_max) / (ns - 1.0) : 0.0;
  r.std_error = std::sqrt(std::max(0.0, var) / ns);
  return r;
}

struct FixedPoint {
  std::vector<std::vector<double>> flows;  // [level][edge]
  DualPoint times;
  std::size_t iterations = 0;
};

/// t <- t/2 + tau(f(t))/2 with f from the explicit path distribution, until
/// max_e |t_e - tau_e(f_e)| <= tol.
inline FixedPoint fixed_point_small(const Network& net, double tol, std::size_t max_iterations = 100000) {
  double expanded = 0.0;
  for (std::size_t j = 0; j < net.level(0).od_origin.size(); ++j) expanded += expanded_path_count(net, 0, j, 100);
  if (expanded > 100.0) throw Error(Errc::budget_exceeded, "fixed_point_small is limited to 100 expanded paths");
  DualPoint t = net.free_flow_times();
  for (std::size_t it = 0; it < max_iterations; ++it) {
    PathLoading pl = path_loading(net, t, 100);
    double residual = 0.0;
    DualPoint target(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const PlainEdgeRef r = net.plain_edges()[i];
      target[i] = net.cost(i).travel_time(pl.flows[r.level][r.edge]);
      residual = std::max(residual, std::abs(t[i] - target[i]));
    }
    if (residual <= tol) return {std::move(pl.flows), std::move(t), it};
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.5 * t[i] + 0.5 * target[i];
  }
  throw Error(Errc::no_convergence, "fixed point not reached within " + std::to_string(max_iterations) + " iterations");
}

}  // namespace hcg::oracle

#endif  // HCG_ORACLE_HPP
