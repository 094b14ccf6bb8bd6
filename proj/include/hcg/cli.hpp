#ifndef HCG_CLI_HPP
#define HCG_CLI_HPP

// Command implementations behind tools/hcg. Each returns the process exit code:
// 0 success, 1 tolerance not reached, 2 input error, 3 solver failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "hcg/error.hpp"
#include "hcg/io.hpp"
#include "hcg/loading.hpp"
#include "hcg/net_model.hpp"
#include "hcg/oracle.hpp"
#include "hcg/solver.hpp"

namespace hcg::cli {

inline constexpr const char* kToolVersion = "hcg 1.0.0";

enum ExitCode : int { kOk = 0, kNotConverged = 1, kInputError = 2, kSolverFailure = 3 };

struct RunManifest {
  std::string network_path;
  std::string config_path;  // empty: defaults
  std::string out_dir;
  std::string command;
  std::string t_file_path;  // load only
  bool wall_time = false;   // history.csv gets a wall_time column
};

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::invalid_argument, "sha256 failed");
  }
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return ss.str();
}

namespace detail {

struct Inputs {
  std::string network_text;
  std::string config_text;
  std::string t_text;
};

// Header lines shared by every output. The output directory is left out so
// that runs into different directories compare byte for byte.
inline nlohmann::ordered_json manifest_json(const RunManifest& m, const Inputs& in) {
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["command"] = m.command;
  j["network"] = {{"path", m.network_path}, {"sha256", sha256_hex(in.network_text)}};
  if (!m.config_path.empty()) j["config"] = {{"path", m.config_path}, {"sha256", sha256_hex(in.config_text)}};
  if (!m.t_file_path.empty()) j["t_file"] = {{"path", m.t_file_path}, {"sha256", sha256_hex(in.t_text)}};
  return j;
}

inline std::string csv_header(const RunManifest& m, const Inputs& in) {
  std::string s = "# " + std::string(kToolVersion) + " " + m.command + "\n";
  s += "# network: " + m.network_path + " sha256=" + sha256_hex(in.network_text) + "\n";
  if (!m.config_path.empty()) s += "# config: " + m.config_path + " sha256=" + sha256_hex(in.config_text) + "\n";
  if (!m.t_file_path.empty()) s += "# t_file: " + m.t_file_path + " sha256=" + sha256_hex(in.t_text) + "\n";
  return s;
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::invalid_argument, "cannot write '" + path.string() + "'");
  out << contents;
}

}  // namespace detail

/// Loads the network (and config) named in the manifest. Input errors throw hcg::Error.
struct LoadedInputs {
  detail::Inputs text;
  NetworkHierarchy hierarchy;
  SolverConfig config;
};

inline LoadedInputs load_inputs(const RunManifest& m) {
  LoadedInputs in;
  in.text.network_text = io::read_file(m.network_path);
  in.hierarchy = io::parse_network_text(in.text.network_text, m.network_path);
  if (!m.config_path.empty()) {
    in.text.config_text = io::read_file(m.config_path);
    in.config = io::parse_config_text(in.text.config_text, m.config_path);
  }
  if (!m.t_file_path.empty()) in.text.t_text = io::read_file(m.t_file_path);
  return in;
}

inline int run_validate(const RunManifest& m, std::ostream& out, std::ostream& err) {
  try {
    const LoadedInputs in = load_inputs(m);
    const auto violations = validate_hierarchy(in.hierarchy);
    for (const Violation& v : violations) {
      out << to_string(v.kind) << " " << v.where << ": " << v.message << "\n";
    }
    if (!violations.empty()) return kInputError;
    out << "ok: " << in.hierarchy.levels.size() << " level(s)\n";
    return kOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kInputError;
  }
}

inline int run_solve(const RunManifest& m, std::ostream& out, std::ostream& err) {
  std::optional<LoadedInputs> in;
  std::optional<Network> net;
  try {
    in = load_inputs(m);
    net.emplace(in->hierarchy);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kInputError;
  }

  SolveOutcome res;
  try {
    res = solve(*net, in->config);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == Errc::backtrack_budget_exceeded ? kSolverFailure : kInputError;
  }

  std::optional<double> l2;
  try {
    l2 = lipschitz_bound_diagnostic(*net);
  } catch (const Error&) {
  }

  try {
    std::filesystem::create_directories(m.out_dir);
    const std::filesystem::path dir(m.out_dir);
    const std::string header = detail::csv_header(m, in->text);
    const auto final_weights = hierarchical_weights(*net, res.t_final);
    detail::write_file(dir / "flows.csv", header + io::flows_csv(*net, res.avg_flows, final_weights));
    detail::write_file(dir / "history.csv", header + io::history_csv(res.history, m.wall_time));

    nlohmann::ordered_json cert;
    cert["manifest"] = detail::manifest_json(m, in->text);
    cert["dual_value"] = res.certificate.dual_value;
    cert["primal_value"] = res.certificate.primal_value;
    cert["gap"] = res.certificate.gap;
    cert["T"] = res.certificate.T;
    cert["L2_diagnostic"] = l2 ? nlohmann::ordered_json(*l2) : nlohmann::ordered_json(nullptr);
    cert["converged"] = res.converged;
    detail::write_file(dir / "certificate.json", cert.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kInputError;
  }

  out << "T=" << res.certificate.T << " gap=" << io::format_double(res.certificate.gap)
      << (res.converged ? " (converged)" : " (gap_tol not reached)") << "\n";
  return res.converged ? kOk : kNotConverged;
}

inline int run_load(const RunManifest& m, std::ostream& out, std::ostream& err) {
  try {
    const LoadedInputs in = load_inputs(m);
    const Network net(in.hierarchy);
    const DualPoint t = io::parse_times_text(net, in.text.t_text, m.t_file_path);
    const LoadResult load = network_loading(net, t);
    std::filesystem::create_directories(m.out_dir);
    detail::write_file(std::filesystem::path(m.out_dir) / "flows.csv",
                       detail::csv_header(m, in.text) + io::flows_csv(net, load.flows, load.weights));
    out << "psi1=" << io::format_double(load.psi1) << "\n";
    return kOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kInputError;
  }
}

/// Loading by the DP against explicit path enumeration at one dual point
/// (free-flow times unless a t-file is given). Exit 0 iff they agree.
inline int run_oracle_compare(const RunManifest& m, std::ostream& out, std::ostream& err) {
  try {
    const LoadedInputs in = load_inputs(m);
    const Network net(in.hierarchy);
    const DualPoint t =
        m.t_file_path.empty() ? net.free_flow_times() : io::parse_times_text(net, in.text.t_text, m.t_file_path);
    const LoadResult dp = network_loading(net, t);
    const oracle::PathLoading pl = oracle::path_loading(net, t);
    double worst = 0.0;
    bool ok = true;
    for (std::size_t k = 0; k < net.level_count(); ++k) {
      for (std::size_t e = 0; e < dp.flows[k].size(); ++e) {
        const double diff = std::abs(dp.flows[k][e] - pl.flows[k][e]);
        worst = std::max(worst, diff);
        if (diff > 1e-10 * (1.0 + std::abs(pl.flows[k][e]))) ok = false;
      }
    }
    out << "max |dp - oracle| = " << io::format_double(worst) << (ok ? " (agree)" : " (DISAGREE)") << "\n";
    return ok ? kOk : kNotConverged;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace hcg::cli

#endif  // HCG_CLI_HPP
