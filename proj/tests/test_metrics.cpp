#include <doctest.h>

#include <cmath>

#include "cocl/error.hpp"
#include "cocl/metrics.hpp"
#include "oracles.hpp"

using namespace cocl;

TEST_CASE("task loss examples") {
  const Task ident(1, DenseMatrix::identity(2), DenseVector{1, 2});
  CHECK(task_loss(ident, DenseVector(2)) == 2.5);

  const Task t = gen_gaussian_task(1, 10, 160, DenseVector::ones(160), 1);
  CHECK(task_loss(t, DenseVector::ones(160)) <= 1e-20);
  CHECK(task_loss(t, DenseVector(160)) == doctest::Approx(squared_norm(t.targets) / 10).epsilon(1e-14));
  CHECK_THROWS_AS(task_loss(t, DenseVector(3)), DimensionError);
}

TEST_CASE("task loss matches the Eigen oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Task t(1, oracle::gaussian_matrix(7, 20, seed), oracle::gaussian_vector(7, seed));
    const auto w = oracle::gaussian_vector(20, seed + 1);
    CHECK(task_loss(t, w) == doctest::Approx(oracle::loss(t, w)).epsilon(1e-12));
  }
}

TEST_CASE("forgetting equals the literal mean over sequence entries") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto seq = build_sequence({ScheduleMode::cyclic, 5, 3}, GeneratorSpec::alternating(30), 4, seed);
    const auto w = oracle::gaussian_vector(30, seed);
    for (std::size_t t = 1; t <= seq.order.size(); ++t) {
      const double literal = oracle::literal_forgetting(seq.tasks, seq.order, w, t);
      CHECK(forgetting(seq.tasks, seq.order, w, t) == doctest::Approx(literal).epsilon(1e-12));
    }
    CHECK(forgetting(seq.tasks, seq.order, w, 1) == doctest::Approx(task_loss(seq.tasks[0], w)).epsilon(1e-15));
  }
}

TEST_CASE("forgetting variants coincide at cycle boundaries") {
  const auto seq = build_sequence({ScheduleMode::cyclic, 4, 3}, GeneratorSpec::shared(30), 4, 2);
  const auto w = oracle::gaussian_vector(30, 2);
  for (std::size_t t : {4, 8, 12}) {
    CHECK(forgetting(seq.tasks, seq.order, w, t) ==
          doctest::Approx(forgetting_unique(seq.tasks, seq.order, w, t)).epsilon(1e-13));
  }
  CHECK_FALSE(forgetting(seq.tasks, seq.order, w, 6) ==
              doctest::Approx(forgetting_unique(seq.tasks, seq.order, w, 6)).epsilon(1e-13));
  CHECK_THROWS_AS(forgetting(seq.tasks, seq.order, w, 0), PreconditionError);
  CHECK_THROWS_AS(forgetting(seq.tasks, seq.order, w, 13), PreconditionError);
}

TEST_CASE("forgetting vanishes when every task is solved") {
  const auto seq = build_sequence({ScheduleMode::one_shot, 4, 1}, GeneratorSpec::shared(160), 5, 3);
  CHECK(forgetting(seq.tasks, seq.order, DenseVector::ones(160), 4) <= 1e-20);
}

TEST_CASE("losses scale quadratically with the data") {
  const Task t(1, oracle::gaussian_matrix(5, 12, 4), oracle::gaussian_vector(5, 4));
  const auto w = oracle::gaussian_vector(12, 5);
  for (double c : {0.1, 2.0, -7.0}) {
    const Task scaled(1, c * t.features, c * t.targets);
    CHECK(task_loss(scaled, w) == doctest::Approx(c * c * task_loss(t, w)).epsilon(1e-12));
  }
}

TEST_CASE("relative last step") {
  const DenseVector w{1, -2, 3};
  CHECK(relative_last_step(w, w).value == 0.0);
  CHECK(relative_last_step(w, DenseVector(3)).value == 1.0);
  CHECK(relative_last_step(DenseVector{2, 0}, DenseVector{1, 0}).value == 0.25);
  const auto zero = relative_last_step(DenseVector(2), DenseVector{1, 0});
  CHECK(zero.degenerate);
  CHECK(std::isinf(zero.value));
}

TEST_CASE("distance to generator") {
  CHECK(distance_to_generator(DenseVector::ones(160), DenseVector::ones(160)) == 0.0);
  CHECK(distance_to_generator(DenseVector(160), DenseVector::ones(160)) == doctest::Approx(std::sqrt(160.0)));
  CHECK(distance_to_generator(DenseVector(160), DenseVector::ones(160)) == doctest::Approx(12.649).epsilon(1e-4));
  const auto a = oracle::gaussian_vector(9, 1);
  const auto b = oracle::gaussian_vector(9, 2);
  CHECK(distance_to_generator(a, b) == distance_to_generator(b, a));
  CHECK(distance_to_generator(a, b) >= 0.0);
}

TEST_CASE("offline oracle") {
  const Task square(1, oracle::gaussian_matrix(6, 6, 3), oracle::gaussian_vector(6, 3));
  const std::vector<Task> one{square};
  const auto direct = oracle::from_eigen(
      Eigen::VectorXd(oracle::to_eigen(square.features).partialPivLu().solve(oracle::to_eigen(square.targets))));
  CHECK(norm(offline_oracle(one) - direct) <= 1e-10 * norm(direct));

  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto many = build_sequence({ScheduleMode::one_shot, 40, 1}, GeneratorSpec::shared(160), 8, seed);
    CHECK(max_abs(offline_oracle(many.tasks) - DenseVector::ones(160)) <= 1e-8);

    const auto few = build_sequence({ScheduleMode::one_shot, 10, 1}, GeneratorSpec::shared(160), 2, seed);
    const auto w = offline_oracle(few.tasks);
    const auto s = stack_offline(few.tasks);
    CHECK(norm(matvec(s.features, w) - s.targets) <= 1e-9 * norm(s.targets));
    CHECK(norm(w) <= norm(DenseVector::ones(160)));
    CHECK(oracle::elementwise_rel(oracle::min_norm(s.features, s.targets), w) <= 1e-10);
  }
}
