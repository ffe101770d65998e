#include "cocl/cocoa.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cocl/error.hpp"

namespace cocl {

namespace {

void check_task_shape(const Task& task, const TaskBlocks& blocks, const Partitioning& partition) {
  if (task.parameters() != partition.total()) {
    throw DimensionError("task has " + std::to_string(task.parameters()) + " columns, partition covers " +
                         std::to_string(partition.total()));
  }
  if (blocks.nodes() != partition.nodes() || blocks.samples != task.samples()) {
    throw DimensionError("task blocks do not match task " + std::to_string(task.id));
  }
}

}  // namespace

bool TaskBlocks::overparameterized() const noexcept {
  return std::all_of(blocks.begin(), blocks.end(), [&](const DenseMatrix& b) { return b.cols() >= samples; });
}

bool TaskBlocks::full_rank() const noexcept {
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (ranks[k] != std::min(blocks[k].rows(), blocks[k].cols())) return false;
  }
  return true;
}

TaskBlocks factor_task(const Task& task, const Partitioning& partition) {
  TaskBlocks out;
  out.task_id = task.id;
  out.samples = task.samples();
  out.blocks.reserve(partition.nodes());
  for (std::size_t k = 0; k < partition.nodes(); ++k) {
    out.blocks.push_back(column_block(task, partition, k));
    auto pi = pinv_with_rank(out.blocks.back());
    out.pinvs.push_back(std::move(pi.matrix));
    out.ranks.push_back(pi.rank);
  }
  return out;
}

const TaskBlocks& BlockCache::get(const Task& task) {
  auto it = entries_.find(task.id);
  if (it == entries_.end()) it = entries_.emplace(task.id, factor_task(task, partition_)).first;
  return it->second;
}

DenseVector aggregate(std::span<const DenseVector> shares, AggregationOrder order) {
  if (shares.empty()) throw PreconditionError("aggregate: no shares");
  const std::size_t n = shares.front().size();
  DenseVector sum(n);
  auto accumulate = [&](const DenseVector& s) {
    if (s.size() != n) throw DimensionError("aggregate: shares differ in length");
    for (std::size_t i = 0; i < n; ++i) sum[i] += s[i];
  };
  if (order == AggregationOrder::ascending) {
    for (const auto& s : shares) accumulate(s);
  } else {
    for (auto it = shares.rbegin(); it != shares.rend(); ++it) accumulate(*it);
  }
  const double k = static_cast<double>(shares.size());
  for (std::size_t i = 0; i < n; ++i) sum[i] /= k;
  return sum;
}

DenseVector local_step_pinv(const DenseMatrix& block_pinv, const DenseVector& y, const DenseVector& v_bar,
                            std::size_t nodes) {
  if (block_pinv.cols() != y.size() || y.size() != v_bar.size()) {
    throw DimensionError("local_step: block has " + std::to_string(block_pinv.cols()) + " rows, y has " +
                         std::to_string(y.size()) + ", v_bar has " + std::to_string(v_bar.size()));
  }
  return (1.0 / static_cast<double>(nodes)) * matvec(block_pinv, y - v_bar);
}

DenseVector local_step(const DenseMatrix& block, const DenseVector& y, const DenseVector& v_bar, std::size_t nodes) {
  if (block.rows() != y.size()) {
    throw DimensionError("local_step: block has " + std::to_string(block.rows()) + " rows, y has " +
                         std::to_string(y.size()));
  }
  return local_step_pinv(pinv(block), y, v_bar, nodes);
}

DenseVector apply_node_update(const DenseMatrix& block, const DenseMatrix& block_pinv, const DenseVector& y,
                              const DenseVector& v_bar, std::size_t nodes, DenseVector& x_k, DenseVector& v_k) {
  DenseVector step = local_step_pinv(block_pinv, y, v_bar, nodes);
  x_k += step;
  v_k = v_bar + static_cast<double>(nodes) * matvec(block, step);
  return step;
}

CocoaState initial_state(const TaskBlocks& blocks, const Partitioning& partition, const DenseVector& w) {
  if (w.size() != partition.total()) {
    throw DimensionError("initial point has length " + std::to_string(w.size()) + ", expected " +
                         std::to_string(partition.total()));
  }
  const double nodes = static_cast<double>(partition.nodes());
  CocoaState state;
  state.x = w;
  state.v.reserve(partition.nodes());
  for (std::size_t k = 0; k < partition.nodes(); ++k) {
    const BlockRange r = partition.range(k);
    state.v.push_back(nodes * matvec(blocks.blocks[k], w.segment(r.offset, r.width)));
  }
  state.v_bar = aggregate(state.v);
  return state;
}

CocoaState inner_iteration(CocoaState state, const Task& task, const TaskBlocks& blocks,
                           const Partitioning& partition) {
  check_task_shape(task, blocks, partition);
  if (state.x.size() != partition.total() || state.v.size() != partition.nodes()) {
    throw DimensionError("CoCoA state does not match the partition");
  }
  const std::size_t nodes = partition.nodes();
  state.v_bar = aggregate(state.v);
  double step_sq = 0.0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const BlockRange r = partition.range(k);
    DenseVector x_k = state.x.segment(r.offset, r.width);
    const DenseVector step =
        apply_node_update(blocks.blocks[k], blocks.pinvs[k], task.targets, state.v_bar, nodes, x_k, state.v[k]);
    state.x.set_segment(r.offset, x_k);
    step_sq += squared_norm(step);
  }
  state.v_bar = aggregate(state.v);
  state.last_step_norm = std::sqrt(step_sq);
  ++state.iteration;
  return state;
}

CocoaState inner_iteration(CocoaState state, const Task& task, const Partitioning& partition) {
  return inner_iteration(std::move(state), task, factor_task(task, partition), partition);
}

SolveMode resolve_mode(SolveMode requested, const TaskBlocks& blocks) {
  if (requested != SolveMode::automatic) return requested;
  return blocks.overparameterized() ? SolveMode::closed_form : SolveMode::iterative;
}

CocoaResult run_cocoa(const Task& task, const Partitioning& partition, const DenseVector& w_init,
                      const CocoaConfig& config, const TaskBlocks* blocks, const CocoaObserver& observer) {
  TaskBlocks local;
  if (blocks == nullptr) {
    local = factor_task(task, partition);
    blocks = &local;
  }
  check_task_shape(task, *blocks, partition);
  if (w_init.size() != partition.total()) {
    throw DimensionError("w_init has length " + std::to_string(w_init.size()) + ", expected " +
                         std::to_string(partition.total()));
  }

  CocoaResult result;
  result.mode_used = resolve_mode(config.mode, *blocks);
  if (result.mode_used == SolveMode::closed_form) {
    if (!blocks->overparameterized()) {
      throw PreconditionError("closed form needs p_k >= n for every block; use iterative mode");
    }
    result.x = closed_form_step(task, *blocks, partition, w_init);
    result.iterations = 1;
    result.step_norms.push_back(norm(result.x - w_init));
    return result;
  }

  CocoaState state = initial_state(*blocks, partition, w_init);
  for (std::size_t i = 0; i < config.max_inner_iterations; ++i) {
    state = inner_iteration(std::move(state), task, *blocks, partition);
    result.step_norms.push_back(state.last_step_norm);
    if (observer) observer(state);
    if (config.early_stop && state.last_step_norm <= config.stop_tolerance * std::max(1.0, norm(state.x))) break;
  }
  result.iterations = state.iteration;
  result.x = std::move(state.x);
  return result;
}

ClosedFormOperator build_operator(const TaskBlocks& blocks, const Task& task) {
  if (!blocks.overparameterized()) {
    throw PreconditionError("closed-form operator needs p_k >= n for every block; use iterative mode");
  }
  if (!blocks.full_rank()) {
    throw PreconditionError("closed-form operator needs full-rank blocks (task " + std::to_string(task.id) + ")");
  }
  const double inv_nodes = 1.0 / static_cast<double>(blocks.nodes());
  std::vector<DenseMatrix> scaled;
  scaled.reserve(blocks.nodes());
  for (const auto& pi : blocks.pinvs) scaled.push_back(inv_nodes * pi);
  ClosedFormOperator op;
  op.Abar = vstack(scaled);
  op.P = DenseMatrix::identity(task.parameters()) - matmul(op.Abar, task.features);
  return op;
}

ClosedFormOperator build_operator(const Task& task, const Partitioning& partition) {
  return build_operator(factor_task(task, partition), task);
}

DenseVector closed_form_update(const ClosedFormOperator& op, const DenseVector& w_prev, const DenseVector& y) {
  return matvec(op.P, w_prev) + matvec(op.Abar, y);
}

DenseVector closed_form_step(const Task& task, const TaskBlocks& blocks, const Partitioning& partition,
                             const DenseVector& w_prev) {
  const DenseVector residual = task.targets - matvec(task.features, w_prev);
  const double inv_nodes = 1.0 / static_cast<double>(partition.nodes());
  DenseVector w = w_prev;
  for (std::size_t k = 0; k < partition.nodes(); ++k) {
    const BlockRange r = partition.range(k);
    const DenseVector step = inv_nodes * matvec(blocks.pinvs[k], residual);
    for (std::size_t i = 0; i < r.width; ++i) w[r.offset + i] += step[i];
  }
  return w;
}

}  // namespace cocl
