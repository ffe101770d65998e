#pragma once

// In-process simulation of the CoCoA communication pattern. Each node owns one
// column block and its share v_k; a coordinator runs synchronous rounds:
//
//   gather:  every node posts v_k to the coordinator mailbox       (K messages)
//   barrier: coordinator averages the shares in ascending node order
//   scatter: coordinator posts v_bar to every node mailbox         (K messages)
//   update:  every node applies its local step
//
// Node phases may run on worker threads; results do not depend on scheduling
// because aggregation order is fixed at the coordinator.

#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "cocl/cocoa.hpp"
#include "cocl/linalg.hpp"
#include "cocl/parallel.hpp"
#include "cocl/tasks.hpp"

namespace cocl {

enum class Direction { scatter, gather };

struct RoundMessage {
  Direction direction = Direction::gather;
  std::size_t node = 0;  // sender for gather, recipient for scatter
  std::size_t round = 0;
  DenseVector payload;   // length n
};

class Mailbox {
 public:
  void push(RoundMessage message);
  std::optional<RoundMessage> try_pop();
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::deque<RoundMessage> queue_;
};

struct NodeHandle {
  std::size_t node_id = 0;
  BlockRange block;
  DenseMatrix local_features;  // n x p_k
  DenseMatrix local_pinv;      // p_k x n
  DenseVector local_x;         // p_k
  DenseVector local_v;         // n
  double last_step_norm = 0.0;
  std::unique_ptr<Mailbox> inbox = std::make_unique<Mailbox>();
  // Test hook: a failed node stops posting its share.
  bool failed = false;
};

struct Coordinator {
  std::size_t nodes = 0;
  std::size_t round = 0;
  DenseVector targets;  // y of the current task
  DenseVector v_bar;
  std::size_t messages = 0;
  AggregationOrder order = AggregationOrder::ascending;  // descending: mutation hook
  std::unique_ptr<Mailbox> inbox = std::make_unique<Mailbox>();
  std::ostream* trace = nullptr;  // one line per round when set
};

struct Network {
  Coordinator coordinator;
  std::vector<NodeHandle> nodes;
  std::shared_ptr<WorkerPool> pool;  // null: nodes run inline

  std::size_t parameters() const;
  // Concatenation of the nodes' local_x in node order.
  DenseVector global_x() const;
};

// Node k holds A_k and starts from local_x = w_init[k], local_v = K A_k local_x.
Network spawn_network(const Task& task, const Partitioning& partition, const DenseVector& w_init,
                      const TaskBlocks* blocks = nullptr);

// One synchronous gather/aggregate/scatter/update round. Throws ProtocolError
// if some node's share is missing.
void run_round(Coordinator& coordinator, std::span<NodeHandle> nodes, WorkerPool* pool = nullptr);
void run_round(Network& network);

// spawn_network followed by `rounds` rounds; returns the concatenated x.
DenseVector run_network(const Task& task, const Partitioning& partition, const DenseVector& w_init,
                        std::size_t rounds, const TaskBlocks* blocks = nullptr);

}  // namespace cocl
