#include "cocl/metrics.hpp"

#include <limits>
#include <string>

#include "cocl/error.hpp"

namespace cocl {

namespace {

std::vector<std::size_t> occurrence_counts(std::size_t unique, std::span<const std::size_t> order, std::size_t t) {
  if (t == 0 || t > order.size()) {
    throw PreconditionError("forgetting: t = " + std::to_string(t) + " outside 1.." + std::to_string(order.size()));
  }
  std::vector<std::size_t> counts(unique, 0);
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t id = order[i];
    if (id == 0 || id > unique) throw PreconditionError("task order references unknown task " + std::to_string(id));
    ++counts[id - 1];
  }
  return counts;
}

}  // namespace

double task_loss(const Task& task, const DenseVector& w) {
  if (w.size() != task.parameters()) {
    throw DimensionError("task_loss: w has length " + std::to_string(w.size()) + ", task has " +
                         std::to_string(task.parameters()) + " columns");
  }
  return squared_norm(matvec(task.features, w) - task.targets) / static_cast<double>(task.samples());
}

double forgetting(std::span<const Task> tasks, std::span<const std::size_t> order, const DenseVector& w,
                  std::size_t t) {
  const auto counts = occurrence_counts(tasks.size(), order, t);
  double total = 0.0;
  for (std::size_t m = 0; m < tasks.size(); ++m) {
    if (counts[m] > 0) total += static_cast<double>(counts[m]) * task_loss(tasks[m], w);
  }
  return total / static_cast<double>(t);
}

double forgetting_unique(std::span<const Task> tasks, std::span<const std::size_t> order, const DenseVector& w,
                         std::size_t t) {
  const auto counts = occurrence_counts(tasks.size(), order, t);
  double total = 0.0;
  std::size_t seen = 0;
  for (std::size_t m = 0; m < tasks.size(); ++m) {
    if (counts[m] == 0) continue;
    total += task_loss(tasks[m], w);
    ++seen;
  }
  return total / static_cast<double>(seen);
}

RelativeStep relative_last_step(const DenseVector& w_last, const DenseVector& w_prev) {
  if (w_last.size() != w_prev.size()) throw DimensionError("relative_last_step: length mismatch");
  const double denom = squared_norm(w_last);
  if (denom == 0.0) return {std::numeric_limits<double>::infinity(), true};
  return {squared_norm(w_last - w_prev) / denom, false};
}

double distance_to_generator(const DenseVector& w, const DenseVector& w_star) {
  if (w.size() != w_star.size()) throw DimensionError("distance_to_generator: length mismatch");
  return norm(w - w_star);
}

DenseVector offline_oracle(std::span<const Task> tasks) {
  const StackedSystem s = stack_offline(tasks);
  return min_norm_solve(s.features, s.targets);
}

}  // namespace cocl
