// Command-line front end: gibbs <verb> [--config PATH] [--seed U64] [--out DIR] [--jobs K]

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gibbs/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulation and thermodynamics of finite-range Gibbs point processes"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  app.add_option("--config", config_path, "experiment file (INI)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed, overrides experiment.seed");
  app.add_option("--out", out, "output directory, overrides experiment.out");
  app.add_option("--jobs", jobs, "worker threads, overrides experiment.jobs")->check(CLI::PositiveNumber);
  app.fallthrough();

  const char* verbs[] = {"sample", "minkowski", "pressure", "gap", "mean-energy",
                         "entropy", "boundary", "gnz", "validate"};
  for (const char* v : verbs) app.add_subcommand(v, std::string("run the ") + v + " experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gibbs::kExitConfig;
  }
  const std::string verb = app.get_subcommands().front()->get_name();
  const auto kind = gibbs::parse_kind(verb);

  gibbs::ExperimentConfig config;
  try {
    if (!config_path.empty()) {
      config = gibbs::load_config(config_path, kind);
    } else if (*kind == gibbs::ExperimentKind::validate) {
      config.kind = *kind;
      config.out = "validate-out";
    } else {
      std::cerr << "config error: --config is required for " << verb << "\n";
      return gibbs::kExitConfig;
    }
  } catch (const gibbs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return gibbs::kExitConfig;
  }
  if (seed) config.seed = *seed;
  if (out) config.out = *out;
  if (jobs) config.jobs = *jobs;
  return gibbs::run_experiment(config, std::cerr);
}
