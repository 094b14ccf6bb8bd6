#ifndef HCG_NET_MODEL_HPP
#define HCG_NET_MODEL_HPP

// Hierarchical network description. Level k edges are either plain (own link
// cost) or portals; a portal at level k stands for one OD pair of level k+1,
// whose demand is the runtime flow on that portal.

#include <algorithm>
#include <cstddef>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "hcg/costs.hpp"
#include "hcg/error.hpp"

namespace hcg {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

/// Zero-based (level, od) reference.
struct ODRef {
  std::size_t level;
  std::size_t od;
  friend bool operator==(const ODRef&, const ODRef&) = default;
};

struct PlainEdge {
  LinkCost cost;
  friend bool operator==(const PlainEdge&, const PlainEdge&) = default;
};

struct PortalEdge {
  ODRef target;
  friend bool operator==(const PortalEdge&, const PortalEdge&) = default;
};

using EdgeKind = std::variant<PlainEdge, PortalEdge>;

struct Edge {
  std::string id;
  std::string from;
  std::string to;
  EdgeKind kind;

  bool is_portal() const noexcept { return std::holds_alternative<PortalEdge>(kind); }
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct ODPair {
  std::string origin;
  std::string destination;
  std::optional<double> demand;  // level 1 only
  friend bool operator==(const ODPair&, const ODPair&) = default;
};

struct LevelGraph {
  std::vector<std::string> nodes;
  std::vector<Edge> edges;
  std::vector<ODPair> od_pairs;
  friend bool operator==(const LevelGraph&, const LevelGraph&) = default;
};

struct NetworkHierarchy {
  std::vector<LevelGraph> levels;
  std::vector<double> gammas;
  // Required when any level graph has a directed cycle.
  std::optional<std::size_t> walk_cap;
  friend bool operator==(const NetworkHierarchy&, const NetworkHierarchy&) = default;
};

enum class ViolationKind {
  NoLevels,
  GammaCountMismatch,
  NonPositiveGamma,
  ZeroWalkCap,
  DuplicateNode,
  DuplicateEdgeId,
  UnknownNode,
  SelfLoop,
  PortalAtLastLevel,
  PortalTargetOutOfRange,
  DuplicatePortalBinding,
  UnboundOD,
  UnknownODEndpoint,
  ODSameEndpoints,
  MissingDemand,
  NonPositiveDemand,
  InducedDemandGiven,
  CyclicLevelWithoutCap,
  NoPath,
};

inline std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::NoLevels: return "NoLevels";
    case ViolationKind::GammaCountMismatch: return "GammaCountMismatch";
    case ViolationKind::NonPositiveGamma: return "NonPositiveGamma";
    case ViolationKind::ZeroWalkCap: return "ZeroWalkCap";
    case ViolationKind::DuplicateNode: return "DuplicateNode";
    case ViolationKind::DuplicateEdgeId: return "DuplicateEdgeId";
    case ViolationKind::UnknownNode: return "UnknownNode";
    case ViolationKind::SelfLoop: return "SelfLoop";
    case ViolationKind::PortalAtLastLevel: return "PortalAtLastLevel";
    case ViolationKind::PortalTargetOutOfRange: return "PortalTargetOutOfRange";
    case ViolationKind::DuplicatePortalBinding: return "DuplicatePortalBinding";
    case ViolationKind::UnboundOD: return "UnboundOD";
    case ViolationKind::UnknownODEndpoint: return "UnknownODEndpoint";
    case ViolationKind::ODSameEndpoints: return "ODSameEndpoints";
    case ViolationKind::MissingDemand: return "MissingDemand";
    case ViolationKind::NonPositiveDemand: return "NonPositiveDemand";
    case ViolationKind::InducedDemandGiven: return "InducedDemandGiven";
    case ViolationKind::CyclicLevelWithoutCap: return "CyclicLevelWithoutCap";
    case ViolationKind::NoPath: return "NoPath";
  }
  return "Unknown";
}

struct Violation {
  ViolationKind kind;
  std::string where;  // e.g. "levels[1].edges[3]"
  std::string message;
};

namespace detail {

inline std::string level_path(std::size_t k) { return "levels[" + std::to_string(k) + "]"; }

// Kahn order; empty optional when the graph has a cycle.
inline std::optional<std::vector<std::size_t>> topological_order(
    std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> arcs) {
  std::vector<std::size_t> indeg(n, 0);
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& [u, v] : arcs) {
    out[u].push_back(v);
    ++indeg[v];
  }
  std::deque<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (indeg[v] == 0) ready.push_back(v);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t u = ready.front();
    ready.pop_front();
    order.push_back(u);
    for (std::size_t v : out[u]) {
      if (--indeg[v] == 0) ready.push_back(v);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

// Fewest arcs from src to dst, or npos.
inline std::size_t hop_distance(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> arcs,
                                std::size_t src, std::size_t dst) {
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& [u, v] : arcs) out[u].push_back(v);
  std::vector<std::size_t> dist(n, npos);
  std::deque<std::size_t> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    if (u == dst) return dist[u];
    for (std::size_t v : out[u]) {
      if (dist[v] == npos) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return npos;
}

}  // namespace detail

/// Checks every structural invariant; an empty result means the hierarchy is usable.
inline std::vector<Violation> validate_hierarchy(const NetworkHierarchy& net) {
  std::vector<Violation> out;
  auto add = [&out](ViolationKind kind, std::string where, std::string message) {
    out.push_back({kind, std::move(where), std::move(message)});
  };

  const std::size_t m = net.levels.size();
  if (m == 0) {
    add(ViolationKind::NoLevels, "levels", "hierarchy has no levels");
    return out;
  }
  if (net.gammas.size() != m) {
    add(ViolationKind::GammaCountMismatch, "gammas",
        "expected " + std::to_string(m) + " gammas, got " + std::to_string(net.gammas.size()));
  }
  for (std::size_t k = 0; k < net.gammas.size(); ++k) {
    if (!(net.gammas[k] > 0.0) || !std::isfinite(net.gammas[k])) {
      add(ViolationKind::NonPositiveGamma, "gammas[" + std::to_string(k) + "]", "gamma must be positive");
    }
  }
  if (net.walk_cap && *net.walk_cap == 0) {
    add(ViolationKind::ZeroWalkCap, "walk_cap", "walk cap must be at least 1");
  }

  // binding_count[k][j]: number of portals of level k-1 pointing at OD j of level k
  std::vector<std::vector<std::size_t>> binding_count(m);
  for (std::size_t k = 0; k < m; ++k) binding_count[k].assign(net.levels[k].od_pairs.size(), 0);

  for (std::size_t k = 0; k < m; ++k) {
    const LevelGraph& level = net.levels[k];
    const std::string lp = detail::level_path(k);

    std::unordered_map<std::string, std::size_t> node_index;
    for (std::size_t i = 0; i < level.nodes.size(); ++i) {
      if (!node_index.emplace(level.nodes[i], i).second) {
        add(ViolationKind::DuplicateNode, lp + ".nodes[" + std::to_string(i) + "]",
            "duplicate node id '" + level.nodes[i] + "'");
      }
    }

    std::unordered_map<std::string, std::size_t> edge_ids;
    std::vector<std::pair<std::size_t, std::size_t>> arcs;
    for (std::size_t i = 0; i < level.edges.size(); ++i) {
      const Edge& e = level.edges[i];
      const std::string ep = lp + ".edges[" + std::to_string(i) + "]";
      if (!edge_ids.emplace(e.id, i).second) {
        add(ViolationKind::DuplicateEdgeId, ep, "duplicate edge id '" + e.id + "'");
      }
      const auto from = node_index.find(e.from);
      const auto to = node_index.find(e.to);
      if (from == node_index.end() || to == node_index.end()) {
        add(ViolationKind::UnknownNode, ep, "edge '" + e.id + "' references an unknown node");
      } else if (e.from == e.to) {
        add(ViolationKind::SelfLoop, ep, "edge '" + e.id + "' is a self-loop");
      } else {
        arcs.emplace_back(from->second, to->second);
      }
      if (const auto* portal = std::get_if<PortalEdge>(&e.kind)) {
        if (k + 1 == m) {
          add(ViolationKind::PortalAtLastLevel, ep, "portal edge '" + e.id + "' on the last level");
        } else if (portal->target.level != k + 1 ||
                   portal->target.od >= net.levels[k + 1].od_pairs.size()) {
          add(ViolationKind::PortalTargetOutOfRange, ep,
              "portal edge '" + e.id + "' must target an existing OD pair of the next level");
        } else if (++binding_count[k + 1][portal->target.od] == 2) {
          add(ViolationKind::DuplicatePortalBinding, ep,
              "OD " + std::to_string(portal->target.od) + " of level " + std::to_string(k + 1) +
                  " is bound by more than one portal");
        }
      }
    }

    const auto order = detail::topological_order(level.nodes.size(), arcs);
    const bool cyclic = !order.has_value();
    if (cyclic && !net.walk_cap) {
      add(ViolationKind::CyclicLevelWithoutCap, lp, "level graph has a cycle and no walk_cap is set");
    }

    for (std::size_t j = 0; j < level.od_pairs.size(); ++j) {
      const ODPair& od = level.od_pairs[j];
      const std::string op = lp + ".od_pairs[" + std::to_string(j) + "]";
      if (k == 0) {
        if (!od.demand) {
          add(ViolationKind::MissingDemand, op, "level-1 OD pair needs a demand");
        } else if (!(*od.demand > 0.0) || !std::isfinite(*od.demand)) {
          add(ViolationKind::NonPositiveDemand, op, "level-1 demand must be positive");
        }
      } else if (od.demand) {
        add(ViolationKind::InducedDemandGiven, op, "demands below level 1 are induced by portal flow");
      }
      const auto o = node_index.find(od.origin);
      const auto d = node_index.find(od.destination);
      if (o == node_index.end() || d == node_index.end()) {
        add(ViolationKind::UnknownODEndpoint, op, "OD pair references an unknown node");
        continue;
      }
      if (o->second == d->second) {
        add(ViolationKind::ODSameEndpoints, op, "origin equals destination");
        continue;
      }
      const std::size_t hops = detail::hop_distance(level.nodes.size(), arcs, o->second, d->second);
      const bool capped_out = cyclic && net.walk_cap && hops != npos && hops > *net.walk_cap;
      if (hops == npos || capped_out) {
        add(ViolationKind::NoPath, op, "no path from '" + od.origin + "' to '" + od.destination + "'");
      }
    }
  }

  for (std::size_t k = 1; k < m; ++k) {
    for (std::size_t j = 0; j < binding_count[k].size(); ++j) {
      if (binding_count[k][j] == 0) {
        add(ViolationKind::UnboundOD, detail::level_path(k) + ".od_pairs[" + std::to_string(j) + "]",
            "OD pair is not bound by any portal of the previous level");
      }
    }
  }
  return out;
}

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations)
      : Error(Errc::validation_error, summarize(violations)), violations_(std::move(violations)) {}

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  static std::string summarize(const std::vector<Violation>& vs) {
    std::string s;
    for (const auto& v : vs) {
      if (!s.empty()) s += "; ";
      s += std::string(to_string(v.kind)) + " at " + v.where + ": " + v.message;
    }
    return s;
  }

  std::vector<Violation> violations_;
};

/// Global index of a plain edge: its level and position in that level's edge list.
struct PlainEdgeRef {
  std::size_t level;
  std::size_t edge;
};

/// Validated, index-based form of a NetworkHierarchy. Immutable.
class Network {
 public:
  struct Level {
    std::size_t node_count = 0;
    std::vector<std::size_t> edge_from;
    std::vector<std::size_t> edge_to;
    std::vector<std::size_t> dual_index;     // plain edge -> position in DualPoint; portal -> npos
    std::vector<std::size_t> portal_target;  // portal edge -> OD index on the next level; plain -> npos
    std::vector<std::vector<std::size_t>> out_edges;
    std::vector<std::size_t> topo_order;  // empty when cyclic
    bool acyclic = true;
    std::vector<std::size_t> od_origin;
    std::vector<std::size_t> od_destination;
    std::vector<std::size_t> destinations;  // distinct OD destinations, first-seen order
    std::vector<std::size_t> od_group;      // OD -> index into destinations
    std::vector<std::size_t> od_binding;    // OD -> portal edge of the previous level (npos on level 0)
  };

  explicit Network(NetworkHierarchy hierarchy) : hierarchy_(std::move(hierarchy)) {
    if (auto violations = validate_hierarchy(hierarchy_); !violations.empty()) {
      throw ValidationError(std::move(violations));
    }
    compile();
  }

  const NetworkHierarchy& hierarchy() const noexcept { return hierarchy_; }
  std::size_t level_count() const noexcept { return levels_.size(); }
  const Level& level(std::size_t k) const { return levels_.at(k); }
  double gamma(std::size_t k) const { return hierarchy_.gammas.at(k); }
  std::optional<std::size_t> walk_cap() const noexcept { return hierarchy_.walk_cap; }

  /// Dimension of the dual variable (number of plain edges over all levels).
  std::size_t plain_edge_count() const noexcept { return plain_.size(); }
  const std::vector<PlainEdgeRef>& plain_edges() const noexcept { return plain_; }
  const LinkCost& cost(std::size_t dual_index) const {
    const PlainEdgeRef r = plain_.at(dual_index);
    return std::get<PlainEdge>(hierarchy_.levels[r.level].edges[r.edge].kind).cost;
  }
  const Edge& edge(std::size_t level, std::size_t e) const { return hierarchy_.levels.at(level).edges.at(e); }
  const Edge& plain_edge(std::size_t dual_index) const {
    const PlainEdgeRef r = plain_.at(dual_index);
    return hierarchy_.levels[r.level].edges[r.edge];
  }

  /// Exogenous level-1 demands in OD order.
  std::vector<double> base_demands() const {
    std::vector<double> d;
    for (const auto& od : hierarchy_.levels.front().od_pairs) d.push_back(*od.demand);
    return d;
  }

  /// tau_e(0) for every plain edge; the solver's default start point.
  std::vector<double> free_flow_times() const {
    std::vector<double> t(plain_.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = cost(i).free_flow();
    return t;
  }

  /// Position of plain edge `id` at level k in the dual vector, or npos.
  std::size_t find_plain(std::size_t level, const std::string& id) const {
    if (level >= levels_.size()) return npos;
    const auto& edges = hierarchy_.levels[level].edges;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (edges[e].id == id) return levels_[level].dual_index[e];
    }
    return npos;
  }

 private:
  void compile() {
    const std::size_t m = hierarchy_.levels.size();
    levels_.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      const LevelGraph& g = hierarchy_.levels[k];
      Level& L = levels_[k];
      std::unordered_map<std::string, std::size_t> node_index;
      for (std::size_t i = 0; i < g.nodes.size(); ++i) node_index.emplace(g.nodes[i], i);
      L.node_count = g.nodes.size();
      L.out_edges.assign(L.node_count, {});
      std::vector<std::pair<std::size_t, std::size_t>> arcs;
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const Edge& edge = g.edges[e];
        const std::size_t u = node_index.at(edge.from);
        const std::size_t v = node_index.at(edge.to);
        L.edge_from.push_back(u);
        L.edge_to.push_back(v);
        L.out_edges[u].push_back(e);
        arcs.emplace_back(u, v);
        if (const auto* portal = std::get_if<PortalEdge>(&edge.kind)) {
          L.dual_index.push_back(npos);
          L.portal_target.push_back(portal->target.od);
        } else {
          L.dual_index.push_back(plain_.size());
          L.portal_target.push_back(npos);
          plain_.push_back({k, e});
        }
      }
      if (auto order = detail::topological_order(L.node_count, arcs)) {
        L.topo_order = std::move(*order);
      } else {
        L.acyclic = false;
      }
      std::map<std::size_t, std::size_t> group_of;
      for (const ODPair& od : g.od_pairs) {
        const std::size_t o = node_index.at(od.origin);
        const std::size_t d = node_index.at(od.destination);
        L.od_origin.push_back(o);
        L.od_destination.push_back(d);
        auto [it, inserted] = group_of.emplace(d, L.destinations.size());
        if (inserted) L.destinations.push_back(d);
        L.od_group.push_back(it->second);
      }
      L.od_binding.assign(g.od_pairs.size(), npos);
    }
    for (std::size_t k = 0; k + 1 < m; ++k) {
      for (std::size_t e = 0; e < levels_[k].portal_target.size(); ++e) {
        if (levels_[k].portal_target[e] != npos) levels_[k + 1].od_binding[levels_[k].portal_target[e]] = e;
      }
    }
  }

  NetworkHierarchy hierarchy_;
  std::vector<Level> levels_;
  std::vector<PlainEdgeRef> plain_;
};

/// Induced demands of level k+1: each OD receives the flow on its binding portal.
inline std::vector<double> portal_demand_map(const Network& net, std::size_t level, std::span<const double> flows) {
  if (level + 1 >= net.level_count()) {
    throw Error(Errc::invalid_argument, "level " + std::to_string(level) + " has no lower level");
  }
  const auto& L = net.level(level);
  if (flows.size() != L.edge_from.size()) {
    throw Error(Errc::missing_portal_flow, "expected a flow for each of the " +
                                               std::to_string(L.edge_from.size()) + " edges of level " +
                                               std::to_string(level));
  }
  std::vector<double> demand(net.level(level + 1).od_origin.size(), 0.0);
  for (std::size_t e = 0; e < flows.size(); ++e) {
    if (L.portal_target[e] == npos) continue;
    if (std::isnan(flows[e])) {
      throw Error(Errc::missing_portal_flow, "portal edge '" + net.edge(level, e).id + "' has no flow");
    }
    demand[L.portal_target[e]] = flows[e];
  }
  return demand;
}

/// Largest number of plain edges, over all levels, on any fully expanded path of OD `od` at `level`.
class LongestPathBound {
 public:
  explicit LongestPathBound(const Network& net) : net_(net) {
    memo_.resize(net.level_count());
    for (std::size_t k = 0; k < net.level_count(); ++k) memo_[k].assign(net.level(k).od_origin.size(), npos);
  }

  std::size_t operator()(std::size_t level, std::size_t od) {
    std::size_t& slot = memo_.at(level).at(od);
    if (slot == npos) slot = compute(level, od);
    return slot;
  }

 private:
  std::size_t edge_length(std::size_t level, std::size_t e) {
    const std::size_t target = net_.level(level).portal_target[e];
    return target == npos ? 1 : (*this)(level + 1, target);
  }

  std::size_t compute(std::size_t level, std::size_t od) {
    const auto& L = net_.level(level);
    const std::size_t dest = L.od_destination[od];
    const std::size_t origin = L.od_origin[od];
    constexpr long kUnreached = -1;
    if (L.acyclic) {
      std::vector<long> best(L.node_count, kUnreached);
      best[dest] = 0;
      for (auto it = L.topo_order.rbegin(); it != L.topo_order.rend(); ++it) {
        const std::size_t v = *it;
        if (v == dest) continue;
        for (std::size_t e : L.out_edges[v]) {
          const long tail = best[L.edge_to[e]];
          if (tail == kUnreached) continue;
          best[v] = std::max(best[v], tail + static_cast<long>(edge_length(level, e)));
        }
      }
      return static_cast<std::size_t>(best[origin]);
    }
    // Walks of at most walk_cap edges, absorbed at the destination.
    const std::size_t cap = *net_.walk_cap();
    std::vector<long> prev(L.node_count, kUnreached);
    prev[dest] = 0;
    for (std::size_t j = 1; j <= cap; ++j) {
      std::vector<long> cur(L.node_count, kUnreached);
      cur[dest] = 0;
      for (std::size_t v = 0; v < L.node_count; ++v) {
        if (v == dest) continue;
        for (std::size_t e : L.out_edges[v]) {
          const long tail = prev[L.edge_to[e]];
          if (tail == kUnreached) continue;
          cur[v] = std::max(cur[v], tail + static_cast<long>(edge_length(level, e)));
        }
      }
      prev = std::move(cur);
    }
    return static_cast<std::size_t>(prev[origin]);
  }

  const Network& net_;
  std::vector<std::vector<std::size_t>> memo_;
};

inline std::size_t longest_path_bound(const Network& net, std::size_t level1_od) {
  return LongestPathBound(net)(0, level1_od);
}

}  // namespace hcg

#endif  // HCG_NET_MODEL_HPP
