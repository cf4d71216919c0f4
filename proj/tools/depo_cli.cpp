#include "depo/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace depo::cli;
  CLI::App app{"Decoupled policy optimization experiments"};
  app.require_subcommand(1);

  RunArgs run;
  std::uint64_t run_seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Train from a config file");
  run_cmd->add_option("config", run.config_path, "Config file")->required();
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Run seed (default: config seed)");
  run_cmd->add_option("--out", run.out, "Output directory");

  std::string suite;
  auto* verify_cmd = app.add_subcommand("verify", "Run a property suite");
  auto* suite_group = verify_cmd->add_option_group("suite");
  auto* suite_pos = suite_group->add_option("name", suite, "occupancy, gradients, theorem1, theorem2 or dominance");
  auto* suite_flag = suite_group->add_option("--suite", suite, "Suite name");
  suite_group->require_option(1);
  (void)suite_pos;
  (void)suite_flag;

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "Export curves, grid heatmaps or rollout traces");
  plot_cmd->add_option("inputs", plot.inputs, "Metrics files (curves) or one checkpoint");
  plot_cmd->add_option("--kind", plot.kind, "curves, heatmap or rollout");
  plot_cmd->add_option("--out", plot.out, "Output directory");
  plot_cmd->add_option("--config", plot.config, "Config the checkpoint was trained with");
  plot_cmd->add_option("--seed", plot.seed, "Start-state seed for rollout");
  plot_cmd->add_option("--steps", plot.steps, "Rollout length")->check(CLI::NonNegativeNumber);

  std::string ck_path;
  auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "Print checkpoint metadata and layouts");
  inspect_cmd->add_option("checkpoint", ck_path, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*run_cmd) {
    if (*seed_opt) run.seed = run_seed;
    for (int i = 0; i < argc; ++i) run.command_line += (i ? " " : "") + std::string(argv[i]);
    return cmd_run(run, std::cout, std::cerr);
  }
  if (*verify_cmd) return cmd_verify(suite, std::cout, std::cerr);
  if (*plot_cmd) return cmd_plot(plot, std::cout, std::cerr);
  return cmd_inspect(ck_path, std::cout, std::cerr);
}
