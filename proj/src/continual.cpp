#include "cocl/continual.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cocl/error.hpp"

namespace cocl {

CocoaState warm_start(const DenseVector& w_prev, const Task& task, const Partitioning& partition) {
  return initial_state(factor_task(task, partition), partition, w_prev);
}

RunTrace run_continual(std::span<const Task> tasks, std::span<const std::size_t> order, const Partitioning& partition,
                       const ContinualConfig& config) {
  if (tasks.empty() || order.empty()) throw PreconditionError("run_continual: empty task sequence");
  if (config.eval_stride == 0) throw PreconditionError("eval_stride must be >= 1");
  const std::size_t p = partition.total();
  for (const auto& task : tasks) {
    if (task.parameters() != p) throw DimensionError("task " + std::to_string(task.id) + " does not match partition");
  }
  for (std::size_t id : order) {
    if (id == 0 || id > tasks.size()) throw PreconditionError("task order references unknown task " + std::to_string(id));
  }
  if (config.reference && config.reference->size() != p) throw DimensionError("reference vector length != p");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::size_t total_steps = order.size();
  BlockCache cache(partition);
  std::vector<std::size_t> counts(tasks.size(), 0);
  RunTrace trace;
  DenseVector w(p);
  DenseVector w_prev;

  for (std::size_t t = 1; t <= total_steps; ++t) {
    const Task& task = tasks[order[t - 1] - 1];
    const TaskBlocks& blocks = cache.get(task);
    CocoaResult step = run_cocoa(task, partition, w, config.cocoa, &blocks);
    w_prev = std::move(w);
    w = std::move(step.x);
    ++counts[task.id - 1];
    trace.steps = t;

    const double w_norm = norm(w);
    const bool diverged = !w.all_finite() || !(w_norm <= config.divergence_threshold);
    if (config.record_w) trace.snapshots.emplace_back(t, w);
    if (!diverged && t % config.eval_stride != 0 && t != total_steps) continue;

    EvalRecord rec;
    rec.t = t;
    rec.diverged = diverged;
    rec.task_losses.assign(tasks.size(), nan);
    double weighted = 0.0;
    double unique_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t m = 0; m < tasks.size(); ++m) {
      if (counts[m] == 0) continue;
      const double loss = task_loss(tasks[m], w);
      rec.task_losses[m] = loss;
      weighted += static_cast<double>(counts[m]) * loss;
      unique_sum += loss;
      ++seen;
    }
    rec.forgetting = weighted / static_cast<double>(t);
    rec.forgetting_unique = unique_sum / static_cast<double>(seen);
    const RelativeStep rel = relative_last_step(w, w_prev);
    rec.rel_step = rel.value;
    if (rel.degenerate) rec.diverged = true;
    rec.dist_to_gen = config.reference ? distance_to_generator(w, *config.reference) : nan;
    trace.records.push_back(std::move(rec));
    if (!config.record_w) trace.snapshots.emplace_back(t, w);

    if (diverged) {
      std::ostringstream msg;
      msg << "diverged at t = " << t << " (task " << task.id << "): ||w_t|| = " << w_norm;
      trace.diverged = true;
      trace.divergence_report = msg.str();
      break;
    }
  }
  trace.final_w = std::move(w);
  return trace;
}

}  // namespace cocl
