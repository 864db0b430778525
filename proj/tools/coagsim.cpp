#include <iostream>

#include <CLI11.hpp>

#include "coag/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace coag::cli;
  CLI::App app{"coagsim: stationary multi-component coagulation with injection"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  int threads = 0;
  std::string output_dir;
  app.add_option("--threads", threads, "worker threads (overrides solver.threads)")->check(CLI::PositiveNumber);
  app.add_flag("--reproducible", global.reproducible, "fixed-order reductions, bit-identical across thread counts");
  app.add_option("--output-dir", output_dir, "artifact directory (else COAGSIM_OUTPUT_DIR, else output.directory)");

  std::string config_path;
  auto* sim = app.add_subcommand("simulate", "integrate to a stationary state and write a checkpoint");
  sim->add_option("config", config_path, "JSON run configuration")->required();

  std::string sub, checkpoint, override_config;
  AnalyzeOptions aopt;
  long trials = -1;
  auto* an = app.add_subcommand("analyze", "diagnostics on a checkpoint: flux, localize, scaling, lemma");
  an->add_option("subcommand", sub, "flux | localize | scaling | lemma")
      ->required()
      ->check(CLI::IsMember({"flux", "localize", "scaling", "lemma"}));
  an->add_option("--checkpoint", checkpoint, "checkpoint written by simulate");
  an->add_option("--config", override_config, "config to use instead of the one embedded in the checkpoint");
  an->add_option("--seed", aopt.seed, "lemma: random seed");
  an->add_option("--trials", trials, "lemma: number of random measures")->check(CLI::NonNegativeNumber);

  std::string templ, grid;
  auto* sw = app.add_subcommand("sweep", "run a config template over a parameter grid");
  sw->add_option("template", templ, "JSON run configuration used for every cell")->required();
  sw->add_option("--grid", grid, "JSON object with gamma, p and/or asymmetry arrays")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidInput;
  }
  if (threads > 0) global.threads = threads;
  if (!output_dir.empty()) global.output_dir = output_dir;

  if (*sim) return simulate(config_path, global, std::cout, std::cerr);
  if (*an) {
    if (!checkpoint.empty()) aopt.checkpoint = checkpoint;
    if (!override_config.empty()) aopt.config = override_config;
    if (trials >= 0) aopt.trials = trials;
    return analyze(sub, aopt, global, std::cout, std::cerr);
  }
  return sweep(templ, grid, global, std::cout, std::cerr);
}
