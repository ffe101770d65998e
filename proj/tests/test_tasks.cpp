#include <doctest.h>

#include <sstream>

#include "cocl/error.hpp"
#include "cocl/tasks.hpp"
#include "oracles.hpp"

using namespace cocl;

TEST_CASE("partition ranges") {
  const auto part = make_partition(160, {16, 32, 48, 64});
  CHECK(part.nodes() == 4);
  CHECK(part.total() == 160);
  CHECK(part.min_block() == 16);
  CHECK(part.range(0) == BlockRange{0, 16});
  CHECK(part.range(1) == BlockRange{16, 32});
  CHECK(part.range(2) == BlockRange{48, 48});
  CHECK(part.range(3) == BlockRange{96, 64});
  CHECK_THROWS_AS(part.range(4), PreconditionError);

  const auto single = make_partition(4, {4});
  CHECK(single.nodes() == 1);
  CHECK(single.range(0) == BlockRange{0, 4});

  const auto even = make_partition(8, {4, 4});
  CHECK(even.range(1) == BlockRange{4, 4});
}

TEST_CASE("invalid partitions") {
  CHECK_THROWS_AS(make_partition(160, {16, 32}), PreconditionError);
  CHECK_THROWS_AS(make_partition(4, {4, 0}), PreconditionError);
  CHECK_THROWS_AS(make_partition(0, {}), PreconditionError);
}

TEST_CASE("column blocks") {
  const Task task = gen_gaussian_task(1, 5, 160, DenseVector::ones(160), 3);
  const auto part = make_partition(160, {16, 32, 48, 64});
  const auto b1 = column_block(task, part, 1);
  REQUIRE(b1.cols() == 32);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(b1(r, 0) == task.features(r, 16));
    CHECK(b1(r, 31) == task.features(r, 47));
  }
  std::vector<DenseMatrix> blocks;
  for (std::size_t k = 0; k < 4; ++k) blocks.push_back(column_block(task, part, k));
  CHECK(hstack(blocks) == task.features);
  CHECK(column_block(task, make_partition(160, {160}), 0) == task.features);
  CHECK_THROWS_AS(column_block(task, part, 4), PreconditionError);
  CHECK_THROWS_AS(column_block(task, make_partition(8, {4, 4}), 0), DimensionError);
}

TEST_CASE("schedules") {
  const TaskSchedule one{ScheduleMode::one_shot, 3, 7};
  CHECK(one.length() == 3);
  CHECK(one.sequence() == std::vector<std::size_t>{1, 2, 3});

  const TaskSchedule cyc{ScheduleMode::cyclic, 2, 3};
  CHECK(cyc.length() == 6);
  CHECK(cyc.sequence() == std::vector<std::size_t>{1, 2, 1, 2, 1, 2});
  CHECK(cyc.task_at(5) == 1);
  CHECK_THROWS(cyc.task_at(0));
  CHECK_THROWS(cyc.task_at(7));
}

TEST_CASE("generators") {
  const auto shared = GeneratorSpec::shared(160);
  CHECK(shared.generator_for(1) == DenseVector::ones(160));
  CHECK(shared.generator_for(2) == DenseVector::ones(160));

  const auto alt = GeneratorSpec::alternating(160);
  const auto& odd = alt.generator_for(3);
  CHECK(alt.generator_for(4) == DenseVector::ones(160));
  std::size_t ones = 0;
  for (std::size_t i = 0; i < 160; ++i) ones += odd[i] == 1.0 ? 1 : 0;
  CHECK(ones == 144);
  CHECK(odd[143] == 1.0);
  CHECK(odd[144] == 0.0);

  // p not divisible by 10: floor(p / 10) trailing zeros.
  const auto alt25 = GeneratorSpec::alternating(25);
  CHECK(alt25.w_odd()[22] == 1.0);
  CHECK(alt25.w_odd()[23] == 0.0);
}

TEST_CASE("generated tasks") {
  const Task zero = gen_gaussian_task(1, 4, 10, DenseVector(10), 1);
  CHECK(zero.targets == DenseVector(4));

  const Task a = gen_gaussian_task(5, 10, 160, DenseVector::ones(160), 42);
  const Task b = gen_gaussian_task(5, 10, 160, DenseVector::ones(160), 42);
  CHECK(a.features == b.features);
  CHECK(a.targets == b.targets);
  CHECK(a.id == 5);

  const Task other_id = gen_gaussian_task(6, 10, 160, DenseVector::ones(160), 42);
  const Task other_seed = gen_gaussian_task(5, 10, 160, DenseVector::ones(160), 43);
  CHECK_FALSE(other_id.features == a.features);
  CHECK_FALSE(other_seed.features == a.features);

  const auto x = min_norm_solve(a.features, a.targets);
  CHECK(norm(matvec(a.features, x) - a.targets) <= 1e-10 * norm(a.targets));
  CHECK(norm(matvec(a.features, DenseVector::ones(160)) - a.targets) <= 1e-12 * norm(a.targets));
}

TEST_CASE("generated features look standard normal") {
  const Task t = gen_gaussian_task(1, 200, 160, DenseVector(160), 7);
  double sum = 0.0, sq = 0.0;
  for (double v : t.features.view()) {
    sum += v;
    sq += v * v;
  }
  const double count = 200.0 * 160.0;
  CHECK(std::abs(sum / count) < 0.02);
  CHECK(std::abs(sq / count - 1.0) < 0.03);
}

TEST_CASE("build_sequence") {
  const auto seq = build_sequence({ScheduleMode::cyclic, 4, 2}, GeneratorSpec::alternating(20), 3, 11);
  REQUIRE(seq.tasks.size() == 4);
  CHECK(seq.order == std::vector<std::size_t>{1, 2, 3, 4, 1, 2, 3, 4});
  const auto alt = GeneratorSpec::alternating(20);
  for (const auto& task : seq.tasks) {
    const auto& g = task.id % 2 == 0 ? DenseVector::ones(20) : alt.w_odd();
    CHECK(norm(matvec(task.features, g) - task.targets) <= 1e-12 * norm(task.targets));
  }
  // Earlier tasks do not depend on M.
  const auto shorter = build_sequence({ScheduleMode::one_shot, 2, 1}, GeneratorSpec::alternating(20), 3, 11);
  CHECK(shorter.tasks[1].features == seq.tasks[1].features);
}

TEST_CASE("stack_offline") {
  const Task a = gen_gaussian_task(1, 2, 4, DenseVector::ones(4), 1);
  const Task b = gen_gaussian_task(2, 2, 4, DenseVector::ones(4), 1);
  const std::vector<Task> one{a};
  CHECK(stack_offline(one).features == a.features);
  const std::vector<Task> two{a, b};
  const auto s = stack_offline(two);
  CHECK(s.features.rows() == 4);
  CHECK(s.features.cols() == 4);
  CHECK(s.targets == DenseVector{a.targets[0], a.targets[1], b.targets[0], b.targets[1]});
  const std::vector<Task> mixed{a, gen_gaussian_task(2, 2, 5, DenseVector::ones(5), 1)};
  CHECK_THROWS_AS(stack_offline(mixed), DimensionError);

  const auto seq = build_sequence({ScheduleMode::one_shot, 5, 1}, GeneratorSpec::shared(160), 10, 3);
  const auto sys = stack_offline(seq.tasks);
  const auto w = min_norm_solve(sys.features, sys.targets);
  CHECK(norm(matvec(sys.features, w) - sys.targets) <= 1e-9 * norm(sys.targets));
}

TEST_CASE("task CSV round trip") {
  const Task t = gen_gaussian_task(3, 4, 6, DenseVector::ones(6), 5);
  std::stringstream buf;
  write_task_csv(buf, t);
  const std::string text = buf.str();
  CHECK(text.rfind("4,6\n", 0) == 0);
  const Task back = read_task_csv(buf, 3);
  CHECK(back.features == t.features);
  CHECK(back.targets == t.targets);

  std::stringstream bad("2,2\n1,2,3\n");
  CHECK_THROWS(read_task_csv(bad, 1));
}
