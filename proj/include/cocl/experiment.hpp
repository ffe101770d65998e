#pragma once

// Experiment harness behind the `cocl` command line tool.
//
// Config files are flat `key = value` text; `#` starts a comment. List values
// are comma separated and may contain inclusive ranges, e.g. `n_m = 1..4, 8`.
//
//   name             label written into CSV metadata          (experiment)
//   p                number of parameters                      (160)
//   partition        block sizes p_k, must sum to p            (16, 32, 48, 64)
//   schedule         one_shot | cyclic                         (cyclic)
//   repeats          cycles for cyclic schedules               (1000)
//   generator        shared | alternating                      (shared)
//   n_m              samples per task, list                    (1..10)
//   M                number of unique tasks, list              (2, 4, 8, 16, 32, 40, 64, 80, 128, 160)
//   seeds            replicate count per cell                  (20)
//   seed_offset      first master seed                         (0)
//   T_c              inner iterations for iterative cells      (1)
//   eval_stride      0 = automatic                             (0)
//   out              output directory                          (results)
//   force_iterative  run cells with n_m >= min p_k iteratively (false)
//   traces           write one trace CSV per cell and seed     (true)
//   svg              write log10 heatmaps of the cell medians  (false)
//   threads          worker threads, 0 = all cores             (0)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cocl/continual.hpp"
#include "cocl/metrics.hpp"
#include "cocl/tasks.hpp"

namespace cocl {

struct ExperimentConfig {
  std::string name = "experiment";
  std::size_t p = 160;
  std::vector<std::size_t> partition{16, 32, 48, 64};
  ScheduleMode schedule = ScheduleMode::cyclic;
  std::size_t repeats = 1000;
  GeneratorKind generator = GeneratorKind::shared;
  std::vector<std::size_t> n_values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::size_t> m_values{2, 4, 8, 16, 32, 40, 64, 80, 128, 160};
  std::size_t seeds = 20;
  std::uint64_t seed_offset = 0;
  std::size_t inner_iterations = 1;
  std::size_t eval_stride = 0;
  std::filesystem::path out = "results";
  bool force_iterative = false;
  bool traces = true;
  bool svg = false;
  std::size_t threads = 0;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Throws ConfigError naming the first invalid field.
void validate(const ExperimentConfig& config);

std::vector<std::string> preset_names();
ExperimentConfig preset(std::string_view name);

// eval_stride if set; otherwise 1 for one-shot schedules and the smallest
// whole number of cycles spanning at least 1000 outer steps for cyclic ones.
std::size_t effective_eval_stride(const ExperimentConfig& config, std::size_t unique_tasks);

enum class CellStatus { ok, diverged, skipped };
std::string_view to_string(CellStatus status);

struct SeedOutcome {
  std::uint64_t seed = 0;
  CellStatus status = CellStatus::ok;
  MetricRecord final;
};

struct CellResult {
  std::size_t n = 0;
  std::size_t m = 0;
  CellStatus status = CellStatus::ok;
  std::string note;
  std::vector<SeedOutcome> seeds;
  double median_forgetting = 0.0;
  double median_rel_step = 0.0;
  double median_dist = 0.0;
  std::size_t diverged_seeds = 0;
};

struct SweepResult {
  std::vector<CellResult> cells;  // n-major, then M, in config order
};

// One continual run for grid cell (n, M) with master seed `seed`.
RunTrace run_single(const ExperimentConfig& config, std::size_t n, std::size_t m, std::uint64_t seed);

bool cell_skipped(const ExperimentConfig& config, std::size_t n);

struct SweepOptions {
  bool write_files = true;
  std::string command = "sweep";  // recorded in the metadata line
  std::ostream* progress = nullptr;
};

// Runs every (n, M, seed) job of the grid. Output assignment is fixed by job
// index, so results do not depend on worker completion order.
SweepResult run_sweep(const ExperimentConfig& config, const SweepOptions& options = {});

// CSV writers. `metadata` becomes a single leading `# ...` line when non-empty.
void write_trace_csv(std::ostream& out, const RunTrace& trace, std::string_view metadata);
void write_summary_csv(std::ostream& out, const SweepResult& result, std::string_view metadata);
void write_cells_csv(std::ostream& out, const SweepResult& result, std::string_view metadata);

enum class HeatmapMetric { forgetting, rel_step, dist_to_gen };
// Self-contained SVG grid of cell medians (rows n_m, columns M), log10 color scale.
std::string heatmap_svg(const SweepResult& result, HeatmapMetric metric, std::string_view title);

std::string format_number(double x);

}  // namespace cocl
