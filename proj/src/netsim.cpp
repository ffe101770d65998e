#include "cocl/netsim.hpp"

#include <cmath>
#include <string>

#include "cocl/error.hpp"

namespace cocl {

void Mailbox::push(RoundMessage message) {
  std::lock_guard lock(mutex_);
  queue_.push_back(std::move(message));
}

std::optional<RoundMessage> Mailbox::try_pop() {
  std::lock_guard lock(mutex_);
  if (queue_.empty()) return std::nullopt;
  RoundMessage m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::size_t Mailbox::size() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

std::size_t Network::parameters() const {
  std::size_t p = 0;
  for (const auto& n : nodes) p += n.local_x.size();
  return p;
}

DenseVector Network::global_x() const {
  std::vector<DenseVector> parts;
  parts.reserve(nodes.size());
  for (const auto& n : nodes) parts.push_back(n.local_x);
  return concat(parts);
}

Network spawn_network(const Task& task, const Partitioning& partition, const DenseVector& w_init,
                      const TaskBlocks* blocks) {
  TaskBlocks local;
  if (blocks == nullptr) {
    local = factor_task(task, partition);
    blocks = &local;
  }
  if (w_init.size() != partition.total() || task.parameters() != partition.total()) {
    throw DimensionError("spawn_network: task, partition and w_init disagree on p");
  }
  Network net;
  net.coordinator.nodes = partition.nodes();
  net.coordinator.targets = task.targets;
  const double nodes = static_cast<double>(partition.nodes());
  net.nodes.resize(partition.nodes());
  for (std::size_t k = 0; k < partition.nodes(); ++k) {
    NodeHandle& h = net.nodes[k];
    h.node_id = k;
    h.block = partition.range(k);
    h.local_features = blocks->blocks[k];
    h.local_pinv = blocks->pinvs[k];
    h.local_x = w_init.segment(h.block.offset, h.block.width);
    h.local_v = nodes * matvec(h.local_features, h.local_x);
  }
  return net;
}

void run_round(Coordinator& coordinator, std::span<NodeHandle> nodes, WorkerPool* pool) {
  const std::size_t k_nodes = nodes.size();
  if (k_nodes != coordinator.nodes) throw ProtocolError("coordinator expects " + std::to_string(coordinator.nodes) + " nodes");
  const std::size_t round = coordinator.round;

  auto on_nodes = [&](const std::function<void(std::size_t)>& phase) {
    if (pool != nullptr) {
      pool->run(k_nodes, phase);
    } else {
      for (std::size_t k = 0; k < k_nodes; ++k) phase(k);
    }
  };

  // Gather.
  on_nodes([&](std::size_t k) {
    NodeHandle& node = nodes[k];
    if (node.failed) return;
    coordinator.inbox->push({Direction::gather, node.node_id, round, node.local_v});
  });

  // Barrier: every share of this round must be present exactly once.
  std::vector<std::optional<DenseVector>> shares(k_nodes);
  while (auto msg = coordinator.inbox->try_pop()) {
    ++coordinator.messages;
    if (msg->direction != Direction::gather || msg->round != round || msg->node >= k_nodes) {
      throw ProtocolError("unexpected message from node " + std::to_string(msg->node) + " in round " +
                          std::to_string(round));
    }
    if (shares[msg->node]) throw ProtocolError("duplicate share from node " + std::to_string(msg->node));
    shares[msg->node] = std::move(msg->payload);
  }
  std::vector<DenseVector> ordered;
  ordered.reserve(k_nodes);
  for (std::size_t k = 0; k < k_nodes; ++k) {
    if (!shares[k]) {
      throw ProtocolError("node " + std::to_string(k) + " did not report in round " + std::to_string(round));
    }
    ordered.push_back(std::move(*shares[k]));
  }
  coordinator.v_bar = aggregate(ordered, coordinator.order);

  // Scatter.
  for (std::size_t k = 0; k < k_nodes; ++k) {
    nodes[k].inbox->push({Direction::scatter, k, round, coordinator.v_bar});
    ++coordinator.messages;
  }

  // Local updates.
  const DenseVector& y = coordinator.targets;
  on_nodes([&](std::size_t k) {
    NodeHandle& node = nodes[k];
    auto msg = node.inbox->try_pop();
    if (!msg || msg->direction != Direction::scatter || msg->round != round) {
      throw ProtocolError("node " + std::to_string(k) + " missing scatter for round " + std::to_string(round));
    }
    const DenseVector step =
        apply_node_update(node.local_features, node.local_pinv, y, msg->payload, k_nodes, node.local_x, node.local_v);
    node.last_step_norm = norm(step);
  });

  if (coordinator.trace != nullptr) {
    *coordinator.trace << "round " << round << " residual " << norm(coordinator.v_bar - y) << " steps";
    for (const auto& node : nodes) *coordinator.trace << ' ' << node.last_step_norm;
    *coordinator.trace << '\n';
  }
  ++coordinator.round;
}

void run_round(Network& network) { run_round(network.coordinator, network.nodes, network.pool.get()); }

DenseVector run_network(const Task& task, const Partitioning& partition, const DenseVector& w_init,
                        std::size_t rounds, const TaskBlocks* blocks) {
  Network net = spawn_network(task, partition, w_init, blocks);
  for (std::size_t i = 0; i < rounds; ++i) run_round(net);
  return net.global_x();
}

}  // namespace cocl
