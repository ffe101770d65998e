#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cocl/error.hpp"
#include "cocl/experiment.hpp"
#include "cocl/selfcheck.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kSelfCheckFailure = 2;
constexpr int kRuntimeError = 3;

void print_cells(const cocl::SweepResult& result) {
  for (const auto& cell : result.cells) {
    std::cout << "n_m=" << cell.n << " M=" << cell.m << " " << cocl::to_string(cell.status);
    if (cell.status != cocl::CellStatus::skipped) {
      std::cout << " forgetting=" << cocl::format_number(cell.median_forgetting)
                << " rel_step=" << cocl::format_number(cell.median_rel_step)
                << " dist=" << cocl::format_number(cell.median_dist);
    }
    if (cell.diverged_seeds > 0) std::cout << " diverged_seeds=" << cell.diverged_seeds;
    std::cout << '\n';
  }
}

int sweep(const cocl::ExperimentConfig& config, const std::string& command, bool quiet) {
  cocl::SweepOptions options;
  options.command = command;
  if (!quiet) options.progress = &std::cerr;
  const auto result = cocl::run_sweep(config, options);
  print_cells(result);
  std::cout << "wrote " << config.out.string() << '\n';
  return EXIT_SUCCESS;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual learning with distributed CoCoA: experiment runner"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress per-job progress");

  std::string run_path;
  auto* run = app.add_subcommand("run", "run a config, writing one trace per cell and seed");
  run->add_option("config", run_path, "config file")->required();

  std::string sweep_path;
  auto* sweep_cmd = app.add_subcommand("sweep", "run the full grid of a config");
  sweep_cmd->add_option("config", sweep_path, "config file")->required();

  std::string preset_name;
  std::string preset_out;
  std::size_t preset_seeds = 0;
  auto* preset_cmd = app.add_subcommand("preset", "run a named preset");
  preset_cmd->add_option("name", preset_name, "one of fig1_2, fig3_4, fig5, fig6, fig7")->required();
  preset_cmd->add_option("--out", preset_out, "output directory");
  preset_cmd->add_option("--seeds", preset_seeds, "replicate seeds per cell")->check(CLI::PositiveNumber);

  bool corrupt = false;
  auto* selfcheck = app.add_subcommand("selfcheck", "run the property suites");
  selfcheck->add_flag("--corrupt-aggregation", corrupt, "test hook: aggregate shares in the wrong order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      auto config = cocl::load_config(run_path);
      config.traces = true;
      return sweep(config, "run", quiet);
    }
    if (*sweep_cmd) return sweep(cocl::load_config(sweep_path), "sweep", quiet);
    if (*preset_cmd) {
      auto config = cocl::preset(preset_name);
      if (!preset_out.empty()) config.out = preset_out;
      if (preset_seeds != 0) config.seeds = preset_seeds;
      return sweep(config, "preset " + preset_name, quiet);
    }
    if (*selfcheck) {
      cocl::SelfCheckOptions options;
      options.corrupt_aggregation_order = corrupt;
      options.log = &std::cout;
      const auto report = cocl::run_selfcheck(options);
      if (const auto* failure = report.first_failure()) {
        std::cout << "selfcheck FAILED: " << failure->name << ": " << failure->detail << " (seed " << failure->seed
                  << ")\n";
        return kSelfCheckFailure;
      }
      std::cout << "selfcheck passed (" << report.checks.size() << " checks)\n";
      return EXIT_SUCCESS;
    }
  } catch (const cocl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return EXIT_SUCCESS;
}
