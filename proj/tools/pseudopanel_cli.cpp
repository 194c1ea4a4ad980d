#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "pseudopanel/error.hpp"
#include "pseudopanel/pipeline.hpp"

namespace pp = pseudopanel;

int main(int argc, char** argv) {
  CLI::App app{"Pseudo panels from repeated cross-sections with self-organizing map cohorts"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed for simulation and map training");
  app.add_option("--out", out_dir, "output directory");

  auto* simulate = app.add_subcommand("simulate", "write synthetic survey waves and the ground-truth sidecar");
  auto* fit_som = app.add_subcommand("fit-som", "train the map, write it with its distance figure and cohort sizes");
  auto* build_panel = app.add_subcommand("build-panel", "aggregate cohorts into the panel and compare groupings");
  auto* estimate = app.add_subcommand("estimate", "fit the share equations and report elasticities");
  auto* run_all = app.add_subcommand("run-all", "simulate (unless surveys are configured), then every stage");
  for (auto* sub : {simulate, fit_som, build_panel, estimate, run_all}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    pp::pipeline::RunConfig cfg = config_path.empty() ? pp::pipeline::RunConfig{} : pp::pipeline::load_config(config_path);
    if (seed) pp::pipeline::set_seed(cfg, *seed);
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    if (simulate->parsed()) {
      for (const auto& p : pp::pipeline::cmd_simulate(cfg)) std::cout << "wrote " << p.string() << '\n';
    } else if (fit_som->parsed()) {
      pp::pipeline::cmd_fit_som(cfg);
    } else if (build_panel->parsed()) {
      pp::pipeline::cmd_build_panel(cfg);
    } else if (estimate->parsed()) {
      pp::pipeline::cmd_estimate(cfg);
    } else if (run_all->parsed()) {
      pp::pipeline::run_all(cfg);
    }
    return 0;
  } catch (const pp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == pp::ErrorKind::io ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
