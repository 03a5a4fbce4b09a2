// Command-line front end: one subcommand per experiment.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "metaqubit/harness.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long long> trials;
  std::optional<unsigned> workers;
  std::string out = "out";
  bool quiet = false;
  bool print_config = false;
};

int execute(const std::string& experiment, const Flags& f) {
  using namespace metaqubit;
  try {
    RunConfig cfg = f.config.empty() ? RunConfig(experiment) : RunConfig::from_ini(experiment, read_text(f.config));
    if (f.seed) cfg.set("run.seed", std::to_string(*f.seed));
    if (f.workers) cfg.set("run.workers", std::to_string(*f.workers));
    if (f.trials) {
      const std::string key = trials_key(experiment);
      if (key.empty()) {
        std::cerr << "warning: --trials has no effect for " << experiment << "\n";
      } else {
        if (*f.trials < 1)
          throw ConfigError(key, "must be at least 1, got " + std::to_string(*f.trials) + " (from --trials)");
        cfg.set(key, std::to_string(*f.trials));
      }
    }
    if (f.print_config) {
      std::cout << cfg.canonical();
      return exit_ok;
    }
    if (!f.quiet) std::cerr << experiment << ": config_hash=" << cfg.hash() << " seed=" << cfg.count("run.seed") << "\n";
    return run(cfg, f.out, f.quiet);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_runtime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zeeman-manifold qubit simulations: detection, tomography, dynamics and coherence"};
  app.require_subcommand(1, 1);

  Flags flags;
  std::string chosen;
  for (const auto& name : metaqubit::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", flags.config, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "override run.seed");
    sub->add_option("--out", flags.out, "output directory")->capture_default_str();
    sub->add_option("--trials", flags.trials, "override the trial or shot count");
    sub->add_option("--workers", flags.workers, "worker threads (results do not depend on it)");
    sub->add_flag("--quiet", flags.quiet, "only print warnings and errors");
    sub->add_flag("--print-config", flags.print_config, "print the resolved canonical config and exit");
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return metaqubit::exit_validation;
  }
  return execute(chosen, flags);
}
