#include <doctest.h>

#include <sstream>

#include "cocl/error.hpp"
#include "cocl/netsim.hpp"
#include "cocl/parallel.hpp"
#include "oracles.hpp"

using namespace cocl;

namespace {

const Partitioning kPart = make_partition(160, {16, 32, 48, 64});

CocoaConfig rounds(std::size_t t_c) {
  CocoaConfig c;
  c.mode = SolveMode::iterative;
  c.max_inner_iterations = t_c;
  c.early_stop = false;
  return c;
}

}  // namespace

TEST_CASE("spawn covers every parameter") {
  const Task task = gen_gaussian_task(1, 10, 160, DenseVector::ones(160), 1);
  const auto w = oracle::gaussian_vector(160, 1);
  const Network net = spawn_network(task, kPart, w);
  CHECK(net.nodes.size() == 4);
  CHECK(net.parameters() == 160);
  CHECK(net.global_x() == w);

  // Mean of the shares is A w.
  DenseVector sum(10);
  for (const auto& node : net.nodes) sum += node.local_v;
  const auto aw = matvec(task.features, w);
  CHECK(norm(0.25 * sum - aw) <= 1e-12 * norm(aw));

  const Network single = spawn_network(task, make_partition(160, {160}), w);
  CHECK(single.nodes.size() == 1);
  CHECK(single.nodes[0].local_features == task.features);
}

TEST_CASE("network matches the monolithic solver bit for bit") {
  struct Case {
    std::size_t p, n;
    std::vector<std::size_t> sizes;
    std::size_t t_c;
  };
  const std::vector<Case> cases{
      {160, 10, {16, 32, 48, 64}, 1}, {160, 3, {16, 32, 48, 64}, 4}, {8, 32, {4, 4}, 60}, {12, 7, {3, 4, 5}, 30}};
  for (const auto& c : cases) {
    const auto part = make_partition(c.p, c.sizes);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Task task = gen_gaussian_task(1, c.n, c.p, DenseVector::ones(c.p), seed);
      const auto w = oracle::gaussian_vector(c.p, seed);
      const auto mono = run_cocoa(task, part, w, rounds(c.t_c)).x;
      CHECK(run_network(task, part, w, c.t_c) == mono);
    }
  }
}

TEST_CASE("threaded rounds equal sequential rounds") {
  const auto part = make_partition(12, {3, 4, 5});
  const Task task = gen_gaussian_task(1, 7, 12, DenseVector::ones(12), 4);
  const auto w = oracle::gaussian_vector(12, 4);
  Network seq = spawn_network(task, part, w);
  Network par = spawn_network(task, part, w);
  par.pool = std::make_shared<WorkerPool>(3);
  for (int i = 0; i < 25; ++i) {
    run_round(seq);
    run_round(par);
  }
  CHECK(seq.global_x() == par.global_x());
}

TEST_CASE("message count is two per node per round") {
  const Task task = gen_gaussian_task(1, 5, 160, DenseVector::ones(160), 2);
  Network net = spawn_network(task, kPart, DenseVector(160));
  for (std::size_t r = 1; r <= 3; ++r) {
    run_round(net);
    CHECK(net.coordinator.messages == 2 * 4 * r);
    CHECK(net.coordinator.round == r);
  }
}

TEST_CASE("converged network stays put") {
  const Task task = gen_gaussian_task(1, 5, 160, DenseVector::ones(160), 3);
  Network net = spawn_network(task, kPart, oracle::gaussian_vector(160, 3));
  run_round(net);
  run_round(net);
  const auto x = net.global_x();
  run_round(net);
  for (const auto& node : net.nodes) CHECK(node.last_step_norm <= 1e-12 * norm(x));
  CHECK(oracle::elementwise_rel(x, net.global_x()) <= 1e-14);
}

TEST_CASE("a failed node is a protocol error") {
  const Task task = gen_gaussian_task(1, 5, 160, DenseVector::ones(160), 4);
  Network net = spawn_network(task, kPart, DenseVector(160));
  net.nodes[2].failed = true;
  CHECK_THROWS_WITH_AS(run_round(net), "node 2 did not report in round 0", ProtocolError);
}

TEST_CASE("stray and duplicate messages are protocol errors") {
  const Task task = gen_gaussian_task(1, 5, 160, DenseVector::ones(160), 5);
  Network stale = spawn_network(task, kPart, DenseVector(160));
  stale.coordinator.inbox->push({Direction::gather, 0, 7, DenseVector(5)});
  CHECK_THROWS_AS(run_round(stale), ProtocolError);

  Network dup = spawn_network(task, kPart, DenseVector(160));
  dup.coordinator.inbox->push({Direction::gather, 1, 0, DenseVector(5)});
  CHECK_THROWS_AS(run_round(dup), ProtocolError);
}

TEST_CASE("descending aggregation breaks bitwise equality") {
  bool any_difference = false;
  for (std::uint64_t seed = 0; seed < 10 && !any_difference; ++seed) {
    const Task task = gen_gaussian_task(1, 10, 160, DenseVector::ones(160), seed);
    const auto w = oracle::gaussian_vector(160, seed);
    Network net = spawn_network(task, kPart, w);
    net.coordinator.order = AggregationOrder::descending;
    for (int i = 0; i < 3; ++i) run_round(net);
    any_difference = !(net.global_x() == run_cocoa(task, kPart, w, rounds(3)).x);
  }
  CHECK(any_difference);
}

TEST_CASE("round trace writes one line per round") {
  const Task task = gen_gaussian_task(1, 5, 160, DenseVector::ones(160), 6);
  Network net = spawn_network(task, kPart, DenseVector(160));
  std::ostringstream log;
  net.coordinator.trace = &log;
  run_round(net);
  run_round(net);
  const std::string text = log.str();
  CHECK(text.rfind("round 0 residual ", 0) == 0);
  CHECK(text.find("\nround 1 residual ") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}
