#include "cocl/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "cocl/error.hpp"

namespace cocl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Box-Muller over 53-bit uniforms in (0, 1].
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::vector<double> parse_csv_row(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    double v = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    while (first != last && *first == ' ') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc()) throw PreconditionError("task csv: bad number '" + cell + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

Task::Task(std::size_t id_, DenseMatrix features_, DenseVector targets_)
    : id(id_), features(std::move(features_)), targets(std::move(targets_)) {
  if (features.rows() != targets.size()) {
    throw DimensionError("task " + std::to_string(id) + ": " + std::to_string(features.rows()) +
                         " feature rows vs " + std::to_string(targets.size()) + " targets");
  }
}

Partitioning::Partitioning(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw PreconditionError("partition needs at least one node");
  offsets_.reserve(sizes_.size());
  for (std::size_t s : sizes_) {
    if (s == 0) throw PreconditionError("partition block sizes must be >= 1");
    offsets_.push_back(total_);
    total_ += s;
  }
}

std::size_t Partitioning::min_block() const noexcept {
  return sizes_.empty() ? 0 : *std::min_element(sizes_.begin(), sizes_.end());
}

BlockRange Partitioning::range(std::size_t k) const {
  if (k >= sizes_.size()) {
    throw PreconditionError("node index " + std::to_string(k) + " out of range for " +
                            std::to_string(sizes_.size()) + " nodes");
  }
  return {offsets_[k], sizes_[k]};
}

Partitioning make_partition(std::size_t p, std::vector<std::size_t> sizes) {
  Partitioning part(std::move(sizes));
  if (part.total() != p) {
    throw PreconditionError("partition sizes sum to " + std::to_string(part.total()) + ", expected p = " +
                            std::to_string(p));
  }
  return part;
}

DenseMatrix column_block(const Task& task, const Partitioning& partition, std::size_t k) {
  if (task.parameters() != partition.total()) {
    throw DimensionError("task has " + std::to_string(task.parameters()) + " columns, partition covers " +
                         std::to_string(partition.total()));
  }
  const BlockRange r = partition.range(k);
  return task.features.column_range(r.offset, r.width);
}

std::size_t TaskSchedule::length() const noexcept {
  return mode == ScheduleMode::one_shot ? unique_tasks : unique_tasks * repeats;
}

std::size_t TaskSchedule::task_at(std::size_t t) const {
  if (t == 0 || t > length()) throw PreconditionError("schedule step " + std::to_string(t) + " out of range");
  return mode == ScheduleMode::one_shot ? t : ((t - 1) % unique_tasks) + 1;
}

std::vector<std::size_t> TaskSchedule::sequence() const {
  std::vector<std::size_t> out(length());
  for (std::size_t t = 1; t <= out.size(); ++t) out[t - 1] = task_at(t);
  return out;
}

GeneratorSpec GeneratorSpec::shared(std::size_t p) { return shared(DenseVector::ones(p)); }

GeneratorSpec GeneratorSpec::shared(DenseVector w_star) {
  GeneratorSpec g;
  g.kind_ = GeneratorKind::shared;
  g.primary_ = std::move(w_star);
  return g;
}

GeneratorSpec GeneratorSpec::alternating(std::size_t p) {
  GeneratorSpec g;
  g.kind_ = GeneratorKind::alternating;
  g.primary_ = DenseVector::ones(p);
  g.odd_ = DenseVector::ones(p);
  const std::size_t zeros = p / 10;
  for (std::size_t i = p - zeros; i < p; ++i) g.odd_[i] = 0.0;
  return g;
}

const DenseVector& GeneratorSpec::generator_for(std::size_t task_id) const {
  if (kind_ == GeneratorKind::alternating && task_id % 2 == 1) return odd_;
  return primary_;
}

Task gen_gaussian_task(std::size_t id, std::size_t n, std::size_t p, const DenseVector& generator,
                       std::uint64_t master_seed) {
  if (n == 0 || p == 0) throw PreconditionError("task dimensions must be >= 1");
  if (generator.size() != p) {
    throw DimensionError("generator length " + std::to_string(generator.size()) + " vs p = " + std::to_string(p));
  }
  GaussianStream rng(splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(id))));
  DenseMatrix features(n, p);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c) features(r, c) = rng.next();
  DenseVector targets = matvec(features, generator);
  return Task(id, std::move(features), std::move(targets));
}

TaskSequence build_sequence(const TaskSchedule& schedule, const GeneratorSpec& generators, std::size_t n,
                            std::uint64_t master_seed) {
  if (schedule.unique_tasks == 0) throw PreconditionError("schedule needs at least one task");
  if (schedule.mode == ScheduleMode::cyclic && schedule.repeats == 0) {
    throw PreconditionError("cyclic schedule needs repeats >= 1");
  }
  TaskSequence seq;
  seq.tasks.reserve(schedule.unique_tasks);
  const std::size_t p = generators.parameters();
  for (std::size_t m = 1; m <= schedule.unique_tasks; ++m) {
    seq.tasks.push_back(gen_gaussian_task(m, n, p, generators.generator_for(m), master_seed));
  }
  seq.order = schedule.sequence();
  return seq;
}

StackedSystem stack_offline(std::span<const Task> tasks) {
  if (tasks.empty()) throw PreconditionError("stack_offline: no tasks");
  const std::size_t p = tasks.front().parameters();
  std::vector<DenseMatrix> features;
  std::vector<DenseVector> targets;
  features.reserve(tasks.size());
  targets.reserve(tasks.size());
  for (const auto& t : tasks) {
    if (t.parameters() != p) {
      throw DimensionError("stack_offline: task " + std::to_string(t.id) + " has " +
                           std::to_string(t.parameters()) + " columns, expected " + std::to_string(p));
    }
    features.push_back(t.features);
    targets.push_back(t.targets);
  }
  return {vstack(features), concat(targets)};
}

void write_task_csv(std::ostream& out, const Task& task) {
  out << task.samples() << ',' << task.parameters() << '\n';
  for (std::size_t r = 0; r < task.samples(); ++r) {
    for (std::size_t c = 0; c < task.parameters(); ++c) out << format_double(task.features(r, c)) << ',';
    out << format_double(task.targets[r]) << '\n';
  }
}

Task read_task_csv(std::istream& in, std::size_t id) {
  std::string line;
  if (!std::getline(in, line)) throw PreconditionError("task csv: missing header");
  const auto header = parse_csv_row(line);
  if (header.size() != 2) throw PreconditionError("task csv: header must be n,p");
  const auto n = static_cast<std::size_t>(header[0]);
  const auto p = static_cast<std::size_t>(header[1]);
  std::vector<double> a;
  std::vector<double> y;
  a.reserve(n * p);
  for (std::size_t r = 0; r < n; ++r) {
    if (!std::getline(in, line)) throw PreconditionError("task csv: expected " + std::to_string(n) + " rows");
    auto row = parse_csv_row(line);
    if (row.size() != p + 1) throw PreconditionError("task csv: row " + std::to_string(r + 1) + " has wrong width");
    a.insert(a.end(), row.begin(), row.end() - 1);
    y.push_back(row.back());
  }
  return Task(id, DenseMatrix(n, p, std::move(a)), DenseVector(std::move(y)));
}

}  // namespace cocl
