#include <iostream>

#include <CLI11.hpp>

#include "experiment.hpp"

namespace bx = blowup::exp;

int main(int argc, char** argv) {
  CLI::App app{"Blow-up experiment runner"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir;
  int workers = 0;
  uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "YAML experiment config")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--workers", workers, "concurrent sweep cells")->check(CLI::PositiveNumber);
  app.add_option_function<uint64_t>("--seed", [&](const uint64_t& s) { seed = s, seed_set = true; }, "RNG seed");
  for (const auto& name : bx::scenario_names()) app.add_subcommand(name, "run the " + name + " scenario");
  app.set_help_all_flag("--help-all");
  CLI11_PARSE(app, argc, argv);

  std::string scenario = app.get_subcommands().front()->get_name();
  bx::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) {
      cfg = bx::load_config(config_path);
      // the config may leave the scenario out; a different one is an error
      if (cfg.scenario != scenario && cfg.scenario != bx::ExperimentConfig{}.scenario)
        throw bx::ConfigError("scenario", "config names '" + cfg.scenario + "' but the subcommand is '" + scenario + "'");
    }
    cfg.scenario = scenario;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (workers > 0) cfg.workers = workers;
    if (seed_set) cfg.seed = seed;
    bx::validate(cfg);
  } catch (const bx::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 2;
  }
  auto r = bx::run(cfg, cfg.out);
  if (r.status != 0) {
    std::cerr << (r.status == 2 ? "invalid config: " : "run failed: ") << r.error << '\n';
    return r.status;
  }
  for (const auto& [k, v] : r.metrics) std::cout << k << " = " << blowup::csv_cell(v) << '\n';
  std::cout << "artifacts in " << cfg.out << '\n';
  return 0;
}
