// hcg: stochastic user equilibrium in hierarchical congestion networks.
//
//   hcg solve    --network F [--config F] --out DIR [--wall-time]
//   hcg load     --network F --t-file F --out DIR
//   hcg validate --network F

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hcg/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic user equilibrium in hierarchical congestion networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hcg::cli::kToolVersion);

  hcg::cli::RunManifest m;

  auto* solve = app.add_subcommand("solve", "Minimize the dual and certify the equilibrium with a duality gap");
  solve->add_option("--network", m.network_path, "Network file (JSON)")->required()->check(CLI::ExistingFile);
  solve->add_option("--config", m.config_path, "Solver config (JSON)")->check(CLI::ExistingFile);
  solve->add_option("--out", m.out_dir, "Output directory")->required();
  solve->add_flag("--wall-time", m.wall_time, "Add a wall_time column to history.csv (not reproducible)");

  auto* load = app.add_subcommand("load", "Logit network loading at given edge times");
  load->add_option("--network", m.network_path, "Network file (JSON)")->required()->check(CLI::ExistingFile);
  load->add_option("--config", m.config_path, "Ignored; accepted for symmetry")->check(CLI::ExistingFile);
  load->add_option("--t-file", m.t_file_path, "CSV with level,edge_id,time columns")->required()->check(CLI::ExistingFile);
  load->add_option("--out", m.out_dir, "Output directory")->required();

  auto* validate = app.add_subcommand("validate", "Check a network file against the model invariants");
  validate->add_option("--network", m.network_path, "Network file (JSON)")->required()->check(CLI::ExistingFile);
  validate->add_option("--config", m.config_path, "Solver config (JSON)")->check(CLI::ExistingFile);
  validate->add_option("--out", m.out_dir, "Unused");

  auto* compare = app.add_subcommand("oracle-compare", "");
  compare->group("");
  compare->add_option("--network", m.network_path)->required()->check(CLI::ExistingFile);
  compare->add_option("--t-file", m.t_file_path)->check(CLI::ExistingFile);
  compare->add_option("--out", m.out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hcg::cli::kInputError;
  }

  if (*solve) {
    m.command = "solve";
    return hcg::cli::run_solve(m, std::cout, std::cerr);
  }
  if (*load) {
    m.command = "load";
    return hcg::cli::run_load(m, std::cout, std::cerr);
  }
  if (*validate) {
    m.command = "validate";
    return hcg::cli::run_validate(m, std::cout, std::cerr);
  }
  m.command = "oracle-compare";
  return hcg::cli::run_oracle_compare(m, std::cout, std::cerr);
}
