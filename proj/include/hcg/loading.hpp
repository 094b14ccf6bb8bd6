#ifndef HCG_LOADING_HPP
#define HCG_LOADING_HPP

// Smooth part of the dual problem. For dual times t on the plain edges, each
// level is weighted bottom-up (a portal costs the soft-min length of its
// target OD one level down), soft-min distances are computed per destination
// by a log-sum-exp Bellman-Ford pass, and the logit flows are pushed top-down.
// The returned flows are -grad of gamma^1 psi^1(t / gamma^1).

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcg/costs.hpp"
#include "hcg/error.hpp"
#include "hcg/net_model.hpp"

namespace hcg {

/// Dual times, one per plain edge, in Network::plain_edges() order.
using DualPoint = std::vector<double>;

/// Per-edge weights of one level (plain: t_e, portal: soft-min length of its target).
using LevelWeights = std::vector<double>;

/// Soft-min distance-to-destination table. An acyclic level has a single
/// layer. A capped cyclic level has cap+1 layers; layer j holds the soft-min
/// over walks of at most j edges that stop on first reaching the destination.
struct SoftminTable {
  std::size_t node_count = 0;
  std::size_t layers = 1;
  std::vector<double> rho;

  double at(std::size_t layer, std::size_t v) const { return rho[layer * node_count + v]; }
  double& at(std::size_t layer, std::size_t v) { return rho[layer * node_count + v]; }
  double final_value(std::size_t v) const { return at(layers - 1, v); }
};

namespace detail {

inline constexpr double kProbabilityFloor = 1e-300;
inline constexpr double kLeakTolerance = 1e-9;
inline constexpr double kCapConvergenceTolerance = 1e-9;

// -gamma * ln sum_i exp(-c_i / gamma) over the finite entries, shifted by the minimum.
class SoftminAccumulator {
 public:
  explicit SoftminAccumulator(std::size_t reserve) { terms_.reserve(reserve); }
  void add(double c) {
    if (std::isfinite(c)) terms_.push_back(c);
  }
  double result(double gamma) const {
    if (terms_.empty()) return kInf;
    double lo = terms_.front();
    for (double c : terms_) lo = std::min(lo, c);
    double sum = 0.0;
    for (double c : terms_) sum += std::exp(-(c - lo) / gamma);
    return lo - gamma * std::log(sum);
  }
  void clear() { terms_.clear(); }

 private:
  std::vector<double> terms_;
};

inline double edge_probability(double edge_weight, double rho_head, double rho_tail, double gamma) {
  if (!std::isfinite(rho_head)) return 0.0;
  const double p = std::exp(-(edge_weight + rho_head - rho_tail) / gamma);
  return p < kProbabilityFloor ? 0.0 : p;
}

}  // namespace detail

/// Soft-min distances to `dest` on level `level` under `weights`.
inline SoftminTable softmin_table(const Network::Level& level, std::span<const double> weights, double gamma,
                                  std::size_t dest, std::optional<std::size_t> cap) {
  if (weights.size() != level.edge_from.size()) {
    throw Error(Errc::invalid_argument, "weights do not match the level's edges");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw Error(Errc::invalid_argument, "edge weights must be finite");
  }
  SoftminTable table;
  table.node_count = level.node_count;
  detail::SoftminAccumulator acc(8);

  if (level.acyclic) {
    table.rho.assign(level.node_count, kInf);
    table.at(0, dest) = 0.0;
    for (auto it = level.topo_order.rbegin(); it != level.topo_order.rend(); ++it) {
      const std::size_t v = *it;
      if (v == dest) continue;
      acc.clear();
      for (std::size_t e : level.out_edges[v]) acc.add(weights[e] + table.at(0, level.edge_to[e]));
      table.at(0, v) = acc.result(gamma);
    }
    return table;
  }

  if (!cap) {
    throw Error(Errc::invalid_argument, "cyclic level requires a walk cap");
  }
  table.layers = *cap + 1;
  table.rho.assign(table.layers * level.node_count, kInf);
  table.at(0, dest) = 0.0;
  for (std::size_t j = 1; j < table.layers; ++j) {
    table.at(j, dest) = 0.0;
    for (std::size_t v = 0; v < level.node_count; ++v) {
      if (v == dest) continue;
      acc.clear();
      for (std::size_t e : level.out_edges[v]) acc.add(weights[e] + table.at(j - 1, level.edge_to[e]));
      table.at(j, v) = acc.result(gamma);
    }
  }
  const std::size_t last = table.layers - 1;
  for (std::size_t v = 0; v < level.node_count; ++v) {
    const double a = table.at(last, v);
    const double b = table.at(last - 1, v);
    const bool stable = (std::isinf(a) && std::isinf(b)) ||
                        (std::isfinite(a) && std::isfinite(b) &&
                         std::abs(a - b) <= detail::kCapConvergenceTolerance * (1.0 + std::abs(a)));
    if (!stable) {
      throw Error(Errc::cap_not_converged,
                  "soft-min has not stabilized after " + std::to_string(*cap) + " relaxation rounds");
    }
  }
  return table;
}

/// Final soft-min distances rho(v); +inf where the destination is unreachable.
inline std::vector<double> softmin_potentials(const Network::Level& level, std::span<const double> weights,
                                              double gamma, std::size_t dest, std::optional<std::size_t> cap) {
  const SoftminTable table = softmin_table(level, weights, gamma, dest, cap);
  std::vector<double> out(level.node_count);
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = table.final_value(v);
  return out;
}

/// Level weights and soft-min tables for every level, computed bottom-up.
struct HierarchicalPotentials {
  std::vector<LevelWeights> weights;              // [level][edge]
  std::vector<std::vector<SoftminTable>> tables;  // [level][destination group]

  /// Soft-min length of OD `od` at `level`.
  double od_length(const Network& net, std::size_t level, std::size_t od) const {
    const auto& L = net.level(level);
    return tables[level][L.od_group[od]].final_value(L.od_origin[od]);
  }
};

inline void check_dual_point(const Network& net, std::span<const double> t) {
  if (t.size() != net.plain_edge_count()) {
    throw Error(Errc::invalid_argument, "dual point has " + std::to_string(t.size()) + " entries, expected " +
                                            std::to_string(net.plain_edge_count()));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) {
      throw Error(Errc::invalid_argument, "dual time of edge '" + net.plain_edge(i).id + "' is not finite");
    }
  }
}

inline HierarchicalPotentials hierarchical_potentials(const Network& net, std::span<const double> t) {
  check_dual_point(net, t);
  const std::size_t m = net.level_count();
  HierarchicalPotentials hp;
  hp.weights.resize(m);
  hp.tables.resize(m);
  for (std::size_t k = m; k-- > 0;) {
    const auto& L = net.level(k);
    LevelWeights& w = hp.weights[k];
    w.resize(L.edge_from.size());
    for (std::size_t e = 0; e < w.size(); ++e) {
      w[e] = L.dual_index[e] != npos ? t[L.dual_index[e]] : hp.od_length(net, k + 1, L.portal_target[e]);
      if (!std::isfinite(w[e])) {
        throw Error(Errc::no_path, "portal edge '" + net.edge(k, e).id + "' has no lower-level path");
      }
    }
    hp.tables[k].reserve(L.destinations.size());
    for (std::size_t dest : L.destinations) {
      hp.tables[k].push_back(softmin_table(L, w, net.gamma(k), dest, net.walk_cap()));
    }
  }
  return hp;
}

inline std::vector<LevelWeights> hierarchical_weights(const Network& net, std::span<const double> t) {
  return hierarchical_potentials(net, t).weights;
}

/// gamma^1 psi^1(t / gamma^1) = -sum_w d_w rho(origin_w) on level 1.
inline double dual_smooth_value(const Network& net, std::span<const double> t) {
  const HierarchicalPotentials hp = hierarchical_potentials(net, t);
  const auto demands = net.base_demands();
  double value = 0.0;
  for (std::size_t j = 0; j < demands.size(); ++j) {
    const double rho = hp.od_length(net, 0, j);
    if (!std::isfinite(rho)) throw Error(Errc::no_path, "level-1 OD " + std::to_string(j) + " has no path");
    value -= demands[j] * rho;
  }
  return value;
}

struct LoadResult {
  double psi1 = 0.0;                                // gamma^1 psi^1(t / gamma^1)
  std::vector<std::vector<double>> flows;           // [level][edge], plain and portal
  std::vector<std::vector<double>> induced_demands;  // [level][od]; level 0 holds the exogenous demands
  // Per level: sum_w sum_p x_p ln(x_p / d_w) (nonpositive), obtained from the
  // edge-choice probabilities by the chain rule of entropy.
  std::vector<double> entropy;
  std::vector<LevelWeights> weights;

  /// Flows on plain edges in dual order; equals -grad of psi1.
  std::vector<double> plain_flows(const Network& net) const {
    std::vector<double> f(net.plain_edge_count());
    for (std::size_t i = 0; i < f.size(); ++i) {
      const PlainEdgeRef r = net.plain_edges()[i];
      f[i] = flows[r.level][r.edge];
    }
    return f;
  }
};

namespace detail {

// Pushes node throughflow from the origins toward `dest`; adds edge flows and
// returns sum over visited nodes of F(v) sum_e p_e ln p_e.
inline double push_flows(const Network::Level& L, std::span<const double> w, const SoftminTable& table, double gamma,
                         std::size_t dest, std::span<const std::pair<std::size_t, double>> sources,
                         std::span<double> edge_flow, const std::string& where) {
  double entropy = 0.0;
  std::vector<double> node_flow(table.layers * L.node_count, 0.0);
  const std::size_t top = table.layers - 1;
  for (const auto& [origin, demand] : sources) node_flow[top * L.node_count + origin] += demand;

  auto split = [&](std::size_t v, std::size_t layer, std::size_t head_layer) {
    const double F = node_flow[layer * L.node_count + v];
    if (F <= 0.0 || v == dest) return;
    const double rho_v = table.at(layer, v);
    double mass = 0.0;
    for (std::size_t e : L.out_edges[v]) {
      const std::size_t u = L.edge_to[e];
      const double p = edge_probability(w[e], table.at(head_layer, u), rho_v, gamma);
      if (p == 0.0) continue;
      mass += p;
      edge_flow[e] += F * p;
      node_flow[head_layer * L.node_count + u] += F * p;
      entropy += F * p * std::log(p);
    }
    if (std::abs(mass - 1.0) > kLeakTolerance) {
      throw Error(Errc::probability_leak,
                  where + ": outgoing probabilities sum to " + std::to_string(mass));
    }
  };

  if (L.acyclic) {
    for (std::size_t v : L.topo_order) split(v, 0, 0);
  } else {
    for (std::size_t j = top; j >= 1; --j) {
      for (std::size_t v = 0; v < L.node_count; ++v) split(v, j, j - 1);
    }
  }
  return entropy;
}

}  // namespace detail

/// Logit network loading at dual point t.
inline LoadResult network_loading(const Network& net, std::span<const double> t) {
  HierarchicalPotentials hp = hierarchical_potentials(net, t);
  const std::size_t m = net.level_count();
  LoadResult r;
  r.flows.resize(m);
  r.induced_demands.resize(m);
  r.entropy.assign(m, 0.0);
  r.induced_demands[0] = net.base_demands();

  for (std::size_t k = 0; k < m; ++k) {
    const auto& L = net.level(k);
    r.flows[k].assign(L.edge_from.size(), 0.0);
    if (k > 0) r.induced_demands[k] = portal_demand_map(net, k - 1, r.flows[k - 1]);
    const auto& demand = r.induced_demands[k];
    for (std::size_t g = 0; g < L.destinations.size(); ++g) {
      std::vector<std::pair<std::size_t, double>> sources;
      for (std::size_t j = 0; j < demand.size(); ++j) {
        if (L.od_group[j] == g && demand[j] > 0.0) sources.emplace_back(L.od_origin[j], demand[j]);
      }
      if (sources.empty()) continue;
      r.entropy[k] += detail::push_flows(L, hp.weights[k], hp.tables[k][g], net.gamma(k), L.destinations[g],
                                         sources, r.flows[k], "level " + std::to_string(k + 1));
    }
  }
  for (std::size_t j = 0; j < r.induced_demands[0].size(); ++j) {
    r.psi1 -= r.induced_demands[0][j] * hp.od_length(net, 0, j);
  }
  r.weights = std::move(hp.weights);
  return r;
}

/// gamma^1 psi^1(t / gamma^1) + sum_e sigma*_e(t_e); the function the solver minimizes.
inline double dual_objective(const Network& net, std::span<const double> t) {
  double composite = 0.0;
  for (std::size_t i = 0; i < t.size() && i < net.plain_edge_count(); ++i) {
    const double s = net.cost(i).conjugate_value(t[i]);
    if (!std::isfinite(s)) {
      throw Error(Errc::outside_domain, "t on edge '" + net.plain_edge(i).id + "' is outside dom sigma*");
    }
    composite += s;
  }
  return dual_smooth_value(net, t) + composite;
}

/// One path (edge indices at its own level, portals unexpanded) and its flow.
struct PathFlow {
  std::vector<std::size_t> edges;
  double flow = 0.0;
};

/// Path flows x: [level][od] -> list of paths.
struct PathFlowTable {
  std::vector<std::vector<std::vector<PathFlow>>> levels;
};

inline double xlogx_ratio(double x, double d) { return x > 0.0 ? x * std::log(x / d) : 0.0; }

/// Nested primal objective Psi(x, f): link-cost integrals plus gamma-weighted path entropies.
inline double primal_objective(const Network& net, const PathFlowTable& x,
                               const std::vector<std::vector<double>>& flows, double tol = 1e-9) {
  const std::size_t m = net.level_count();
  if (x.levels.size() != m || flows.size() != m) {
    throw Error(Errc::inconsistent_flows, "path table and flows must cover every level");
  }
  double value = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const auto& L = net.level(k);
    if (flows[k].size() != L.edge_from.size() || x.levels[k].size() != L.od_origin.size()) {
      throw Error(Errc::inconsistent_flows, "level " + std::to_string(k + 1) + " has the wrong shape");
    }
    std::vector<double> theta_x(L.edge_from.size(), 0.0);
    double entropy = 0.0;
    for (std::size_t j = 0; j < L.od_origin.size(); ++j) {
      const double demand = k == 0 ? net.base_demands()[j] : flows[k - 1][L.od_binding[j]];
      double total = 0.0;
      for (const PathFlow& p : x.levels[k][j]) {
        if (p.flow < 0.0) throw Error(Errc::negative_path_flow, "negative path flow at level " + std::to_string(k + 1));
        total += p.flow;
        for (std::size_t e : p.edges) theta_x.at(e) += p.flow;
        if (demand > 0.0) entropy += xlogx_ratio(p.flow, demand);
      }
      if (std::abs(total - demand) > tol * (1.0 + std::abs(demand))) {
        throw Error(Errc::inconsistent_flows, "path flows of OD " + std::to_string(j) + " at level " +
                                                  std::to_string(k + 1) + " do not sum to its demand");
      }
    }
    for (std::size_t e = 0; e < theta_x.size(); ++e) {
      if (std::abs(theta_x[e] - flows[k][e]) > tol * (1.0 + std::abs(flows[k][e]))) {
        throw Error(Errc::inconsistent_flows, "edge '" + net.edge(k, e).id + "' flow differs from Theta x");
      }
      if (L.dual_index[e] != npos) value += net.cost(L.dual_index[e]).cost_integral(std::max(0.0, flows[k][e]));
    }
    value += net.gamma(k) * entropy;
  }
  return value;
}

}  // namespace hcg

#endif  // HCG_LOADING_HPP
