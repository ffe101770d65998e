#pragma once

// Outer continual-learning loop: tasks arrive one at a time, each solved by
// CoCoA warm-started at the previous solution, starting from w_0 = 0.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cocl/cocoa.hpp"
#include "cocl/metrics.hpp"
#include "cocl/tasks.hpp"

namespace cocl {

struct ContinualConfig {
  CocoaConfig cocoa;
  std::size_t eval_stride = 1;  // metrics at t % eval_stride == 0 and at t = T
  bool record_w = false;        // keep every w_t instead of only evaluated ones
  double divergence_threshold = 1e12;
  std::optional<DenseVector> reference;  // w* for dist_to_gen; NaN when absent
};

struct EvalRecord : MetricRecord {
  std::vector<double> task_losses;  // indexed by task id - 1; NaN for tasks not yet seen
};

struct RunTrace {
  std::vector<EvalRecord> records;  // strictly increasing t
  std::vector<std::pair<std::size_t, DenseVector>> snapshots;
  DenseVector final_w;
  std::size_t steps = 0;  // outer steps completed
  bool diverged = false;
  std::string divergence_report;
};

// CoCoA state for task `task` started at w_prev: x = w_prev, v_k = K A_k w_prev[k],
// so that v_bar = A w_prev.
CocoaState warm_start(const DenseVector& w_prev, const Task& task, const Partitioning& partition);

// `order` holds 1-based task ids into `tasks`. A non-finite w_t or one with
// norm above divergence_threshold ends the run early with diverged = true and
// a final record at that t.
RunTrace run_continual(std::span<const Task> tasks, std::span<const std::size_t> order, const Partitioning& partition,
                       const ContinualConfig& config);

}  // namespace cocl
