#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cocl/linalg.hpp"

namespace cocl {

// One least-squares fit problem (A_m, y_m). Task ids are 1-based.
struct Task {
  Task() = default;
  Task(std::size_t id, DenseMatrix features, DenseVector targets);

  std::size_t id = 0;
  DenseMatrix features;
  DenseVector targets;

  std::size_t samples() const noexcept { return features.rows(); }
  std::size_t parameters() const noexcept { return features.cols(); }
};

// Contiguous half-open column range [offset, offset + width).
struct BlockRange {
  std::size_t offset = 0;
  std::size_t width = 0;

  friend bool operator==(const BlockRange&, const BlockRange&) = default;
};

// Assignment of contiguous column blocks of width p_k to nodes 0..K-1.
class Partitioning {
 public:
  Partitioning() = default;
  // Throws PreconditionError if sizes is empty or has a zero entry.
  explicit Partitioning(std::vector<std::size_t> sizes);

  std::size_t nodes() const noexcept { return sizes_.size(); }
  std::size_t total() const noexcept { return total_; }
  std::size_t min_block() const noexcept;
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  // Node indices are 0-based. Throws PreconditionError when k >= nodes().
  BlockRange range(std::size_t k) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

// Throws PreconditionError unless sum(sizes) == p.
Partitioning make_partition(std::size_t p, std::vector<std::size_t> sizes);

// n_m x p_k submatrix of the task's features for node k (0-based).
DenseMatrix column_block(const Task& task, const Partitioning& partition, std::size_t k);

enum class ScheduleMode { one_shot, cyclic };

struct TaskSchedule {
  ScheduleMode mode = ScheduleMode::one_shot;
  std::size_t unique_tasks = 1;  // M
  std::size_t repeats = 1;       // cycles; ignored for one_shot

  std::size_t length() const noexcept;
  // tau(t) for 1-based t, returning a 1-based task id.
  std::size_t task_at(std::size_t t) const;
  std::vector<std::size_t> sequence() const;
};

enum class GeneratorKind { shared, alternating };

// Ground-truth parameter vectors the targets are generated from.
class GeneratorSpec {
 public:
  // w* = 1_p for every task.
  static GeneratorSpec shared(std::size_t p);
  static GeneratorSpec shared(DenseVector w_star);
  // Even task ids use w_even = 1_p; odd ids use w_odd, which is 1_p with the
  // last floor(p / 10) entries zeroed.
  static GeneratorSpec alternating(std::size_t p);

  GeneratorKind kind() const noexcept { return kind_; }
  std::size_t parameters() const noexcept { return primary_.size(); }
  const DenseVector& generator_for(std::size_t task_id) const;
  // w* for the shared family, w_even for the alternating one.
  const DenseVector& reference() const noexcept { return primary_; }
  const DenseVector& w_odd() const noexcept { return odd_; }

 private:
  GeneratorKind kind_ = GeneratorKind::shared;
  DenseVector primary_;
  DenseVector odd_;
};

// Standard Gaussian feature matrix drawn row-major from a per-task stream,
// targets = features * generator. The stream is mt19937_64 seeded with
// splitmix64(master_seed ^ splitmix64(id)); normals come from the Box-Muller
// transform, both outputs of each pair consumed in order. Depends only on
// (master_seed, id, n, p, generator).
Task gen_gaussian_task(std::size_t id, std::size_t n, std::size_t p, const DenseVector& generator,
                       std::uint64_t master_seed);

struct TaskSequence {
  std::vector<Task> tasks;          // M unique tasks, tasks[m - 1].id == m
  std::vector<std::size_t> order;   // tau(1..T), 1-based ids into tasks
};

// Generates the M unique tasks once; repeats in the order reuse them.
TaskSequence build_sequence(const TaskSchedule& schedule, const GeneratorSpec& generators, std::size_t n,
                            std::uint64_t master_seed);

struct StackedSystem {
  DenseMatrix features;
  DenseVector targets;
};

// Row-stacks all tasks into the offline centralized system (A_S, y_S).
StackedSystem stack_offline(std::span<const Task> tasks);

// Debug dump: header "n,p", then one row per sample: a_1..a_p,y.
void write_task_csv(std::ostream& out, const Task& task);
Task read_task_csv(std::istream& in, std::size_t id);

}  // namespace cocl
