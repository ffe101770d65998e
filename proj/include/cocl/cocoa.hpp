#pragma once

// CoCoA inner solver for one least-squares task whose unknowns are split into
// contiguous column blocks, one per node.
//
// Each inner iteration every node k solves its local subproblem exactly with
// the block pseudoinverse,
//
//   dx_k = (1/K) A_k^+ (y - v_bar),   x_k += dx_k,   v_k = v_bar + K A_k dx_k,
//
// and v_bar is the mean of the node shares v_k. The shares are initialized as
// v_k = K A_k x_k so that v_bar = A x holds throughout; with p_k >= n and full
// rank blocks the first iteration already interpolates the task and every
// later step vanishes, which gives the one-step map
//
//   w_t = P w_{t-1} + Abar y,   P = I - Abar A,   Abar = (1/K) [A_1^+; ...; A_K^+].

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cocl/linalg.hpp"
#include "cocl/tasks.hpp"

namespace cocl {

enum class SolveMode { automatic, iterative, closed_form };

struct CocoaConfig {
  std::size_t max_inner_iterations = 1;  // T_c
  SolveMode mode = SolveMode::automatic;
  // Iterative mode stops once ||dx|| <= stop_tolerance * max(1, ||x||).
  bool early_stop = true;
  double stop_tolerance = 1e-13;
};

// Column blocks of one task and their pseudoinverses.
struct TaskBlocks {
  std::size_t task_id = 0;
  std::size_t samples = 0;
  std::vector<DenseMatrix> blocks;
  std::vector<DenseMatrix> pinvs;
  std::vector<std::size_t> ranks;

  std::size_t nodes() const noexcept { return blocks.size(); }
  // p_k >= n for every block.
  bool overparameterized() const noexcept;
  bool full_rank() const noexcept;
};

TaskBlocks factor_task(const Task& task, const Partitioning& partition);

// Pseudoinverse cache keyed by task id for a fixed partition.
class BlockCache {
 public:
  explicit BlockCache(Partitioning partition) : partition_(std::move(partition)) {}

  const TaskBlocks& get(const Task& task);
  const Partitioning& partition() const noexcept { return partition_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  Partitioning partition_;
  std::unordered_map<std::size_t, TaskBlocks> entries_;
};

struct CocoaState {
  DenseVector x;               // p
  std::vector<DenseVector> v;  // K shares of length n
  DenseVector v_bar;           // mean of v
  std::size_t iteration = 0;
  double last_step_norm = 0.0;
};

// Descending order exists only as a mutation hook for the equivalence checks.
enum class AggregationOrder { ascending, descending };

DenseVector aggregate(std::span<const DenseVector> shares, AggregationOrder order = AggregationOrder::ascending);

// (1/K) A_k^+ (y - v_bar) from a precomputed pseudoinverse.
DenseVector local_step_pinv(const DenseMatrix& block_pinv, const DenseVector& y, const DenseVector& v_bar,
                            std::size_t nodes);
DenseVector local_step(const DenseMatrix& block, const DenseVector& y, const DenseVector& v_bar, std::size_t nodes);

// One node's part of an inner iteration; updates x_k and v_k in place and
// returns dx_k. Shared by the monolithic loop and the simulated network.
DenseVector apply_node_update(const DenseMatrix& block, const DenseMatrix& block_pinv, const DenseVector& y,
                              const DenseVector& v_bar, std::size_t nodes, DenseVector& x_k, DenseVector& v_k);

// x = w, v_k = K A_k w_k, v_bar = mean(v) = A w.
CocoaState initial_state(const TaskBlocks& blocks, const Partitioning& partition, const DenseVector& w);

CocoaState inner_iteration(CocoaState state, const Task& task, const TaskBlocks& blocks,
                           const Partitioning& partition);
CocoaState inner_iteration(CocoaState state, const Task& task, const Partitioning& partition);

// Mode that `automatic` resolves to: closed form iff p_k >= n for all k.
SolveMode resolve_mode(SolveMode requested, const TaskBlocks& blocks);

struct CocoaResult {
  DenseVector x;
  std::size_t iterations = 0;
  std::vector<double> step_norms;  // ||dx|| per executed iteration
  SolveMode mode_used = SolveMode::iterative;
};

using CocoaObserver = std::function<void(const CocoaState&)>;

// Runs up to T_c inner iterations from w_init. `blocks` may come from a
// BlockCache; when null they are computed here. The observer, if set, sees
// the state after every iterative step.
CocoaResult run_cocoa(const Task& task, const Partitioning& partition, const DenseVector& w_init,
                      const CocoaConfig& config, const TaskBlocks* blocks = nullptr,
                      const CocoaObserver& observer = {});

struct ClosedFormOperator {
  DenseMatrix P;     // p x p
  DenseMatrix Abar;  // p x n
};

// Throws PreconditionError when some p_k < n or a block is rank deficient.
ClosedFormOperator build_operator(const TaskBlocks& blocks, const Task& task);
ClosedFormOperator build_operator(const Task& task, const Partitioning& partition);

// P w_prev + Abar y.
DenseVector closed_form_update(const ClosedFormOperator& op, const DenseVector& w_prev, const DenseVector& y);

// The same map evaluated as w + Abar (y - A w) without forming P.
DenseVector closed_form_step(const Task& task, const TaskBlocks& blocks, const Partitioning& partition,
                             const DenseVector& w_prev);

}  // namespace cocl
