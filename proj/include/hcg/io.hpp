#ifndef HCG_IO_HPP
#define HCG_IO_HPP

// File formats. Network files are strict JSON (version 1); unknown keys are
// errors. Level numbers in files are 1-based, OD indices 0-based.

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcg/costs.hpp"
#include "hcg/error.hpp"
#include "hcg/loading.hpp"
#include "hcg/net_model.hpp"
#include "hcg/solver.hpp"

namespace hcg::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

/// Decimal with 17 significant digits; round-trips every double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::parse_error, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline void line_col(const std::string& text, std::size_t byte, std::size_t& line, std::size_t& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 0;
    std::size_t col = 0;
    line_col(text, e.byte, line, col);
    throw Error(Errc::parse_error,
                source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw Error(Errc::parse_error, where + ": " + what);
}

inline void expect_keys(const json& obj, const std::string& where, std::set<std::string> required,
                        std::set<std::string> optional = {}) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!required.count(key) && !optional.count(key)) fail(where, "unknown key '" + key + "'");
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) fail(where, "missing key '" + key + "'");
  }
}

inline double number(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) fail(where + "." + key, "expected a number");
  return v.get<double>();
}

inline std::string string(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_string()) fail(where + "." + key, "expected a string");
  return v.get<std::string>();
}

inline std::size_t index(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) fail(where + "." + key, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

inline const json& array(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_array()) fail(where + "." + key, "expected an array");
  return v;
}

inline LinkCost parse_cost(const json& c, const std::string& where) {
  if (!c.is_object() || !c.contains("type") || !c.at("type").is_string()) fail(where, "cost needs a string 'type'");
  const std::string type = c.at("type").get<std::string>();
  try {
    if (type == "constant") {
      expect_keys(c, where, {"type", "t0"});
      return ConstantCost{number(c, "t0", where)};
    }
    if (type == "affine") {
      expect_keys(c, where, {"type", "a", "b"});
      return AffineCost{number(c, "a", where), number(c, "b", where)};
    }
    if (type == "power") {
      expect_keys(c, where, {"type", "t0", "beta", "cap", "mu"});
      return PowerCost{number(c, "t0", where), number(c, "beta", where), number(c, "cap", where),
                       number(c, "mu", where)};
    }
  } catch (const Error& e) {
    if (e.code() == Errc::parse_error) throw;
    fail(where, e.what());
  }
  fail(where + ".type", "unknown cost type '" + type + "'");
}

inline json cost_to_json(const LinkCost& cost) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ConstantCost>) {
          return {{"type", "constant"}, {"t0", c.t0}};
        } else if constexpr (std::is_same_v<T, AffineCost>) {
          return {{"type", "affine"}, {"a", c.a}, {"b", c.b}};
        } else {
          return {{"type", "power"}, {"t0", c.t0}, {"beta", c.beta}, {"cap", c.cap}, {"mu", c.mu}};
        }
      },
      cost.params());
}

}  // namespace detail

/// Strict schema parse; does not run validate_hierarchy.
inline NetworkHierarchy parse_network_text(const std::string& text, const std::string& source = "<network>") {
  using namespace detail;
  const json root = parse_json(text, source);
  expect_keys(root, "$", {"version", "gammas", "levels"}, {"walk_cap"});
  if (!root.at("version").is_number_integer() || root.at("version").get<int>() != kFormatVersion) {
    fail("$.version", "unsupported version (expected 1)");
  }
  NetworkHierarchy net;
  for (const json& g : array(root, "gammas", "$")) {
    if (!g.is_number()) fail("$.gammas", "expected numbers");
    net.gammas.push_back(g.get<double>());
  }
  if (root.contains("walk_cap")) net.walk_cap = index(root, "walk_cap", "$");

  const json& levels = array(root, "levels", "$");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const std::string lp = "$.levels[" + std::to_string(k) + "]";
    const json& lv = levels[k];
    expect_keys(lv, lp, {"nodes", "edges", "od_pairs"});
    LevelGraph level;
    for (const json& n : array(lv, "nodes", lp)) {
      if (!n.is_string()) fail(lp + ".nodes", "node ids are strings");
      level.nodes.push_back(n.get<std::string>());
    }
    const json& edges = array(lv, "edges", lp);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string ep = lp + ".edges[" + std::to_string(i) + "]";
      const json& e = edges[i];
      if (!e.is_object() || !e.contains("kind") || !e.at("kind").is_string()) fail(ep, "edge needs a string 'kind'");
      const std::string kind = e.at("kind").get<std::string>();
      Edge edge{"", "", "", PlainEdge{ConstantCost{1.0}}};
      if (kind == "plain") {
        expect_keys(e, ep, {"id", "from", "to", "kind", "cost"});
        edge.kind = PlainEdge{parse_cost(e.at("cost"), ep + ".cost")};
      } else if (kind == "portal") {
        expect_keys(e, ep, {"id", "from", "to", "kind", "target_od"});
        const json& target = e.at("target_od");
        expect_keys(target, ep + ".target_od", {"level", "od"});
        const std::size_t target_level = index(target, "level", ep + ".target_od");
        if (target_level == 0) fail(ep + ".target_od.level", "levels are numbered from 1");
        edge.kind = PortalEdge{{target_level - 1, index(target, "od", ep + ".target_od")}};
      } else {
        fail(ep + ".kind", "unknown edge kind '" + kind + "'");
      }
      edge.id = string(e, "id", ep);
      edge.from = string(e, "from", ep);
      edge.to = string(e, "to", ep);
      level.edges.push_back(std::move(edge));
    }
    const json& ods = array(lv, "od_pairs", lp);
    for (std::size_t j = 0; j < ods.size(); ++j) {
      const std::string op = lp + ".od_pairs[" + std::to_string(j) + "]";
      const json& o = ods[j];
      expect_keys(o, op, {"origin", "destination"}, {"demand"});
      ODPair od{string(o, "origin", op), string(o, "destination", op), std::nullopt};
      if (o.contains("demand")) od.demand = number(o, "demand", op);
      level.od_pairs.push_back(std::move(od));
    }
    net.levels.push_back(std::move(level));
  }
  return net;
}

/// Parse and validate; throws ValidationError listing every violation.
inline NetworkHierarchy parse_network(const std::string& path) {
  NetworkHierarchy net = parse_network_text(read_file(path), path);
  if (auto violations = validate_hierarchy(net); !violations.empty()) throw ValidationError(std::move(violations));
  return net;
}

inline std::string serialize_network(const NetworkHierarchy& net) {
  json root;
  root["version"] = kFormatVersion;
  root["gammas"] = net.gammas;
  if (net.walk_cap) root["walk_cap"] = *net.walk_cap;
  json levels = json::array();
  for (const LevelGraph& level : net.levels) {
    json lv;
    lv["nodes"] = level.nodes;
    json edges = json::array();
    for (const Edge& e : level.edges) {
      json je = {{"id", e.id}, {"from", e.from}, {"to", e.to}};
      if (const auto* portal = std::get_if<PortalEdge>(&e.kind)) {
        je["kind"] = "portal";
        je["target_od"] = {{"level", portal->target.level + 1}, {"od", portal->target.od}};
      } else {
        je["kind"] = "plain";
        je["cost"] = detail::cost_to_json(std::get<PlainEdge>(e.kind).cost);
      }
      edges.push_back(std::move(je));
    }
    lv["edges"] = std::move(edges);
    json ods = json::array();
    for (const ODPair& od : level.od_pairs) {
      json jo = {{"origin", od.origin}, {"destination", od.destination}};
      if (od.demand) jo["demand"] = *od.demand;
      ods.push_back(std::move(jo));
    }
    lv["od_pairs"] = std::move(ods);
    levels.push_back(std::move(lv));
  }
  root["levels"] = std::move(levels);
  return root.dump(2) + "\n";
}

/// Solver config file; keys mirror SolverConfig, all optional.
inline SolverConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
  using namespace detail;
  const json root = parse_json(text, source);
  expect_keys(root, "$", {}, {"L0", "max_iters", "gap_tol", "max_backtracks_per_iter", "seed"});
  SolverConfig cfg;
  if (root.contains("L0")) cfg.L0 = number(root, "L0", "$");
  if (root.contains("max_iters")) cfg.max_iters = index(root, "max_iters", "$");
  if (root.contains("gap_tol")) cfg.gap_tol = number(root, "gap_tol", "$");
  if (root.contains("max_backtracks_per_iter")) {
    cfg.max_backtracks_per_iter = index(root, "max_backtracks_per_iter", "$");
  }
  if (root.contains("seed")) cfg.seed = index(root, "seed", "$");
  try {
    cfg.check();
  } catch (const Error& e) {
    fail(source, e.what());
  }
  return cfg;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

}  // namespace detail

/// Dual times from CSV with columns level, edge_id, time (others ignored,
/// '#' lines skipped). Rows naming portal edges are ignored; every plain edge
/// must be present.
inline DualPoint parse_times_text(const Network& net, const std::string& text, const std::string& source = "<t-file>") {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  int col_level = -1;
  int col_edge = -1;
  int col_time = -1;
  DualPoint t(net.plain_edge_count(), kInf);
  auto where = [&] { return source + ":" + std::to_string(line_no); };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    if (col_level < 0) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == "level") col_level = static_cast<int>(i);
        if (cells[i] == "edge_id") col_edge = static_cast<int>(i);
        if (cells[i] == "time") col_time = static_cast<int>(i);
      }
      if (col_level < 0 || col_edge < 0 || col_time < 0) {
        throw Error(Errc::parse_error, where() + ": header must name level, edge_id and time columns");
      }
      continue;
    }
    const std::size_t needed = static_cast<std::size_t>(std::max({col_level, col_edge, col_time}));
    if (cells.size() <= needed) throw Error(Errc::parse_error, where() + ": too few columns");
    std::size_t level = 0;
    double value = 0.0;
    try {
      std::size_t pos = 0;
      level = std::stoul(cells[col_level], &pos);
      if (pos != cells[col_level].size()) throw std::invalid_argument("level");
      value = std::stod(cells[col_time], &pos);
      if (pos != cells[col_time].size()) throw std::invalid_argument("time");
    } catch (const std::exception&) {
      throw Error(Errc::parse_error, where() + ": malformed number");
    }
    if (level == 0 || level > net.level_count()) throw Error(Errc::parse_error, where() + ": level out of range");
    const auto& edges = net.hierarchy().levels[level - 1].edges;
    const auto it = std::find_if(edges.begin(), edges.end(), [&](const Edge& e) { return e.id == cells[col_edge]; });
    if (it == edges.end()) throw Error(Errc::parse_error, where() + ": unknown edge '" + cells[col_edge] + "'");
    if (it->is_portal()) continue;
    if (!std::isfinite(value)) throw Error(Errc::parse_error, where() + ": time must be finite");
    t[net.find_plain(level - 1, cells[col_edge])] = value;
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::isinf(t[i])) {
      throw Error(Errc::missing_edge_time, "no time for plain edge '" + net.plain_edge(i).id + "' at level " +
                                               std::to_string(net.plain_edges()[i].level + 1));
    }
  }
  return t;
}

/// flows.csv body: one row per edge (plain and portal) of every level. The
/// time column is the level weight: t_e on plain edges, the soft-min length
/// of the target OD on portals.
inline std::string flows_csv(const Network& net, const std::vector<std::vector<double>>& flows,
                             const std::vector<LevelWeights>& weights) {
  std::string out = "level,edge_id,flow,time\n";
  for (std::size_t k = 0; k < net.level_count(); ++k) {
    const auto& edges = net.hierarchy().levels[k].edges;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      out += std::to_string(k + 1) + "," + edges[e].id + "," + format_double(flows[k][e]) + "," +
             format_double(weights[k][e]) + "\n";
    }
  }
  return out;
}

inline std::string history_csv(const std::vector<IterationRecord>& history, bool with_wall_time) {
  std::string out = with_wall_time ? "iter,L_used,n_func_evals,dual_value,gap,wall_time\n"
                                   : "iter,L_used,n_func_evals,dual_value,gap\n";
  for (const auto& r : history) {
    out += std::to_string(r.iter) + "," + format_double(r.L_used) + "," + std::to_string(r.n_func_evals) + "," +
           format_double(r.dual_value) + "," + format_double(r.gap);
    if (with_wall_time) out += "," + format_double(r.wall_time);
    out += "\n";
  }
  return out;
}

}  // namespace hcg::io

#endif  // HCG_IO_HPP
