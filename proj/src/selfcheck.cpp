#include "cocl/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include <Eigen/LU>

#include "cocl/cocoa.hpp"
#include "cocl/continual.hpp"
#include "cocl/linalg.hpp"
#include "cocl/metrics.hpp"
#include "cocl/netsim.hpp"
#include "cocl/tasks.hpp"

namespace cocl {

namespace {

struct Violation {
  std::uint64_t seed;
  std::string message;
};

void expect(bool ok, std::uint64_t seed, const std::function<std::string()>& message) {
  if (!ok) throw Violation{seed, message()};
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << x;
  return s.str();
}

DenseMatrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  return gen_gaussian_task(1, rows, cols, DenseVector(cols), seed).features;
}

DenseVector gaussian_vector(std::size_t len, std::uint64_t seed) {
  const DenseMatrix m = gaussian(1, len, seed ^ 0x5eedULL);
  return DenseVector(std::vector<double>(m.view().begin(), m.view().end()));
}

// max_i |a_i - b_i| relative to max(1, ||a||_inf).
double elementwise_gap(const DenseVector& a, const DenseVector& b) {
  return max_abs(a - b) / std::max(1.0, max_abs(a));
}

double relative_residual(const Task& task, const DenseVector& w) {
  return norm(matvec(task.features, w) - task.targets) / std::max(norm(task.targets), 1e-300);
}

const Partitioning& reference_partition() {
  static const Partitioning part = make_partition(160, {16, 32, 48, 64});
  return part;
}

void check_penrose() {
  struct Shape {
    std::size_t rows, cols;
    bool rank_two;
  };
  for (const Shape s : {Shape{2, 5, false}, Shape{5, 2, false}, Shape{4, 4, false}, Shape{3, 3, true}}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const DenseMatrix m = s.rank_two ? matmul(gaussian(3, 2, seed), gaussian(2, 3, seed + 100))
                                       : gaussian(s.rows, s.cols, seed);
      const DenseMatrix mp = pinv(m);
      const double nm = frobenius_norm(m);
      const double np = frobenius_norm(mp);
      const DenseMatrix mmp = matmul(m, mp);
      const DenseMatrix pm = matmul(mp, m);
      expect(frobenius_norm(matmul(mmp, m) - m) <= 1e-9 * nm, seed, [] { return "M M+ M != M"; });
      expect(frobenius_norm(matmul(pm, mp) - mp) <= 1e-9 * np, seed, [] { return "M+ M M+ != M+"; });
      expect(frobenius_norm(mmp - mmp.transpose()) <= 1e-9, seed, [] { return "M M+ not symmetric"; });
      expect(frobenius_norm(pm - pm.transpose()) <= 1e-9, seed, [] { return "M+ M not symmetric"; });
    }
  }
}

void check_full_rank_broad() {
  for (const auto& [rows, cols] : {std::pair<std::size_t, std::size_t>{2, 5}, {1, 16}, {10, 16}, {10, 64}, {16, 16}}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const DenseMatrix m = gaussian(rows, cols, seed);
      const double gap = frobenius_norm(matmul(m, pinv(m)) - DenseMatrix::identity(rows));
      expect(gap <= 1e-9, seed, [&] { return "||M M+ - I|| = " + fmt(gap); });
    }
  }
}

void check_min_norm_matches_pinv() {
  for (const auto& [rows, cols] : {std::pair<std::size_t, std::size_t>{3, 8}, {8, 3}, {10, 160}, {6, 6}}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const DenseMatrix a = gaussian(rows, cols, seed);
      const DenseVector y = gaussian_vector(rows, seed);
      const double gap = elementwise_gap(matvec(pinv(a), y), min_norm_solve(a, y));
      expect(gap <= 1e-12, seed, [&] { return "min_norm_solve vs pinv * y gap " + fmt(gap); });
    }
  }
}

void check_generator_consistency() {
  for (const auto& gens : {GeneratorSpec::shared(160), GeneratorSpec::alternating(160)}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto seq = build_sequence({ScheduleMode::one_shot, 6, 1}, gens, 10, seed);
      for (const auto& task : seq.tasks) {
        const DenseVector& g = gens.generator_for(task.id);
        const double r = norm(matvec(task.features, g) - task.targets);
        expect(r <= 1e-12 * norm(task.targets), seed, [&] { return "task " + std::to_string(task.id) + " residual " + fmt(r); });
      }
    }
  }
}

void check_partition_cover() {
  const std::vector<std::vector<std::size_t>> layouts{{16, 32, 48, 64}, {80, 80}, {160}, {1, 159}};
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Task task = gen_gaussian_task(1, 7, 160, DenseVector::ones(160), seed);
    for (const auto& sizes : layouts) {
      const Partitioning part = make_partition(160, sizes);
      std::vector<DenseMatrix> blocks;
      for (std::size_t k = 0; k < part.nodes(); ++k) blocks.push_back(column_block(task, part, k));
      expect(hstack(blocks) == task.features, seed, [] { return "blocks do not reassemble the features"; });
    }
  }
}

void check_task_purity() {
  const auto gens = GeneratorSpec::shared(40);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = build_sequence({ScheduleMode::one_shot, 3, 1}, gens, 4, seed);
    const auto b = build_sequence({ScheduleMode::cyclic, 5, 2}, gens, 4, seed);
    for (std::size_t m = 0; m < 3; ++m) {
      expect(a.tasks[m].features == b.tasks[m].features && a.tasks[m].targets == b.tasks[m].targets, seed,
             [&] { return "task " + std::to_string(m + 1) + " depends on M or schedule"; });
    }
  }
}

void check_one_step_convergence() {
  CocoaConfig cfg;
  cfg.mode = SolveMode::iterative;
  cfg.max_inner_iterations = 3;
  cfg.early_stop = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (std::size_t n = 1; n <= 10; ++n) {
      const Task task = gen_gaussian_task(seed + 1, n, 160, DenseVector::ones(160), seed);
      const DenseVector w_prev = gaussian_vector(160, seed + n);
      double after_first = 0.0;
      const CocoaResult r = run_cocoa(task, reference_partition(), w_prev, cfg, nullptr, [&](const CocoaState& s) {
        if (s.iteration == 1) after_first = relative_residual(task, s.x);
      });
      expect(after_first <= 1e-9, seed, [&] { return "n=" + std::to_string(n) + " residual after i=0: " + fmt(after_first); });
      expect(r.step_norms[1] <= 1e-12 * norm(r.x), seed,
             [&] { return "n=" + std::to_string(n) + " step at i=1: " + fmt(r.step_norms[1]); });
      expect(relative_residual(task, r.x) <= 1e-9, seed, [] { return "final iterate does not interpolate the task"; });
    }
  }
}

void check_path_equivalence() {
  CocoaConfig iter;
  iter.mode = SolveMode::iterative;
  iter.max_inner_iterations = 1;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 1 + seed % 10;
    const Task task = gen_gaussian_task(seed + 1, n, 160, DenseVector::ones(160), 1000 + seed);
    const TaskBlocks blocks = factor_task(task, reference_partition());
    const DenseVector w_prev = gaussian_vector(160, 2000 + seed);
    const DenseVector closed = closed_form_update(build_operator(blocks, task), w_prev, task.targets);
    const DenseVector iterative = run_cocoa(task, reference_partition(), w_prev, iter, &blocks).x;
    const DenseVector network = run_network(task, reference_partition(), w_prev, 1, &blocks);
    const double g1 = elementwise_gap(closed, iterative);
    const double g2 = elementwise_gap(closed, network);
    expect(g1 <= 1e-12, seed, [&] { return "closed form vs iterative gap " + fmt(g1); });
    expect(g2 <= 1e-12, seed, [&] { return "closed form vs network gap " + fmt(g2); });
  }
}

void check_cocoa_determinism() {
  const Partitioning part = make_partition(8, {4, 4});
  CocoaConfig cfg;
  cfg.mode = SolveMode::iterative;
  cfg.max_inner_iterations = 50;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Task task = gen_gaussian_task(1, 32, 8, DenseVector::ones(8), seed);
    const DenseVector w0 = gaussian_vector(8, seed);
    expect(run_cocoa(task, part, w0, cfg).x == run_cocoa(task, part, w0, cfg).x, seed,
           [] { return "repeated run_cocoa differs"; });
  }
}

void check_k1_square() {
  const Partitioning part = make_partition(6, {6});
  CocoaConfig cfg;
  cfg.mode = SolveMode::iterative;
  cfg.max_inner_iterations = 1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Task task = gen_gaussian_task(1, 6, 6, gaussian_vector(6, seed), seed);
    Eigen::MatrixXd a(6, 6);
    Eigen::VectorXd y(6);
    for (int r = 0; r < 6; ++r) {
      y(r) = task.targets[static_cast<std::size_t>(r)];
      for (int c = 0; c < 6; ++c) a(r, c) = task.features(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
    const Eigen::VectorXd direct = a.partialPivLu().solve(y);
    DenseVector oracle(6);
    for (std::size_t i = 0; i < 6; ++i) oracle[i] = direct(static_cast<Eigen::Index>(i));
    const DenseVector x = run_cocoa(task, part, gaussian_vector(6, seed + 7), cfg).x;
    const double gap = norm(x - oracle) / norm(oracle);
    expect(gap <= 1e-10, seed, [&] { return "K=1 one-step solve off by " + fmt(gap); });
  }
}

void check_underparameterized() {
  const Partitioning part = make_partition(8, {4, 4});
  CocoaConfig cfg;
  cfg.mode = SolveMode::iterative;
  cfg.max_inner_iterations = 100000;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DenseVector w_star = DenseVector::ones(8);
    const Task task = gen_gaussian_task(1, 32, 8, w_star, seed);
    double last = std::numeric_limits<double>::infinity();
    bool monotone = true;
    const CocoaResult r = run_cocoa(task, part, DenseVector(8), cfg, nullptr, [&](const CocoaState& s) {
      if (s.iteration % 100 != 0) return;
      const double res = norm(matvec(task.features, s.x) - task.targets);
      if (res > last) monotone = false;
      last = res;
    });
    const double err = norm(r.x - w_star) / norm(w_star);
    expect(err <= 1e-6, seed, [&] { return "underparameterized task not recovered: " + fmt(err); });
    expect(monotone, seed, [] { return "residual increased between checkpoints"; });
  }
}

void check_network_equivalence(bool corrupt) {
  struct Case {
    std::size_t p, n;
    std::vector<std::size_t> sizes;
    std::size_t rounds;
  };
  const std::vector<Case> cases{{160, 10, {16, 32, 48, 64}, 3}, {8, 32, {4, 4}, 40}, {12, 5, {3, 4, 5}, 25}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const auto& c : cases) {
      const Partitioning part = make_partition(c.p, c.sizes);
      const Task task = gen_gaussian_task(1, c.n, c.p, DenseVector::ones(c.p), 3000 + seed);
      const TaskBlocks blocks = factor_task(task, part);
      const DenseVector w0 = gaussian_vector(c.p, seed);
      CocoaConfig cfg;
      cfg.mode = SolveMode::iterative;
      cfg.max_inner_iterations = c.rounds;
      cfg.early_stop = false;
      const DenseVector mono = run_cocoa(task, part, w0, cfg, &blocks).x;
      Network net = spawn_network(task, part, w0, &blocks);
      if (corrupt) net.coordinator.order = AggregationOrder::descending;
      for (std::size_t i = 0; i < c.rounds; ++i) run_round(net);
      expect(net.global_x() == mono, seed, [&] {
        return "network differs from monolithic loop (p=" + std::to_string(c.p) + ", n=" + std::to_string(c.n) +
               "), max gap " + fmt(max_abs(net.global_x() - mono));
      });
      const std::size_t expected = 2 * part.nodes() * c.rounds;
      expect(net.coordinator.messages == expected, seed, [&] {
        return "message count " + std::to_string(net.coordinator.messages) + " != " + std::to_string(expected);
      });
    }
  }
}

TaskSequence small_cyclic(std::uint64_t seed) {
  return build_sequence({ScheduleMode::cyclic, 5, 4}, GeneratorSpec::shared(160), 4, seed);
}

void check_latest_task_every_step() {
  ContinualConfig cfg;
  cfg.record_w = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto seq = small_cyclic(seed);
    const RunTrace trace = run_continual(seq.tasks, seq.order, reference_partition(), cfg);
    for (const auto& [t, w] : trace.snapshots) {
      const double r = relative_residual(seq.tasks[seq.order[t - 1] - 1], w);
      expect(r <= 1e-9, seed, [&] { return "t=" + std::to_string(t) + " latest task residual " + fmt(r); });
    }
  }
}

void check_recurrence_fidelity() {
  ContinualConfig cfg;
  cfg.record_w = true;
  cfg.cocoa.mode = SolveMode::closed_form;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto seq = small_cyclic(seed);
    const RunTrace trace = run_continual(seq.tasks, seq.order, reference_partition(), cfg);
    std::vector<ClosedFormOperator> ops;
    for (const auto& task : seq.tasks) ops.push_back(build_operator(task, reference_partition()));
    DenseVector w(160);
    for (const auto& [t, w_t] : trace.snapshots) {
      const std::size_t id = seq.order[t - 1];
      w = closed_form_update(ops[id - 1], w, seq.tasks[id - 1].targets);
      const double gap = elementwise_gap(w, w_t);
      expect(gap <= 1e-12, seed, [&] { return "t=" + std::to_string(t) + " recurrence gap " + fmt(gap); });
      w = w_t;
    }
  }
}

void check_continual_determinism() {
  ContinualConfig cfg;
  cfg.eval_stride = 3;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto seq = small_cyclic(seed);
    const RunTrace a = run_continual(seq.tasks, seq.order, reference_partition(), cfg);
    const RunTrace b = run_continual(seq.tasks, seq.order, reference_partition(), cfg);
    bool same = a.final_w == b.final_w && a.records.size() == b.records.size();
    for (std::size_t i = 0; same && i < a.records.size(); ++i) {
      same = a.records[i].forgetting == b.records[i].forgetting && a.records[i].rel_step == b.records[i].rel_step;
    }
    expect(same, seed, [] { return "identical runs produced different traces"; });
  }
}

void check_forgetting_mean() {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto seq = build_sequence({ScheduleMode::cyclic, 4, 3}, GeneratorSpec::alternating(20), 3, seed);
    const DenseVector w = gaussian_vector(20, seed);
    for (std::size_t t = 1; t <= seq.order.size(); ++t) {
      double literal = 0.0;
      for (std::size_t i = 0; i < t; ++i) literal += task_loss(seq.tasks[seq.order[i] - 1], w);
      literal /= static_cast<double>(t);
      const double f = forgetting(seq.tasks, seq.order, w, t);
      expect(std::abs(f - literal) <= 1e-12 * literal, seed, [&] { return "t=" + std::to_string(t) + " forgetting mismatch"; });
    }
  }
}

void check_metric_scaling() {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Task task = gen_gaussian_task(1, 5, 20, gaussian_vector(20, seed), seed);
    const DenseVector w = gaussian_vector(20, seed + 1);
    for (double c : {0.5, 3.0, -2.0}) {
      const Task scaled(1, c * task.features, c * task.targets);
      const double ratio = task_loss(scaled, w) / task_loss(task, w);
      expect(std::abs(ratio - c * c) <= 1e-12 * c * c, seed, [&] { return "loss scaled by " + fmt(ratio) + ", expected c^2"; });
    }
  }
}

void check_offline_oracle() {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const std::size_t m : {3, 40}) {
      const auto seq = build_sequence({ScheduleMode::one_shot, m, 1}, GeneratorSpec::shared(160), 8, seed);
      const StackedSystem s = stack_offline(seq.tasks);
      const DenseVector w = offline_oracle(seq.tasks);
      const double r = norm(matvec(s.features, w) - s.targets) / norm(s.targets);
      expect(r <= 1e-9, seed, [&] { return "offline residual " + fmt(r); });
      if (m * 8 > 160) {
        const double d = max_abs(w - DenseVector::ones(160));
        expect(d <= 1e-8, seed, [&] { return "N > p oracle misses w* by " + fmt(d); });
      } else {
        expect(norm(w) <= norm(DenseVector::ones(160)), seed, [] { return "N < p oracle is not minimum norm"; });
      }
    }
  }
}

}  // namespace

bool SelfCheckReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult* SelfCheckReport::first_failure() const {
  for (const auto& c : checks) {
    if (!c.passed) return &c;
  }
  return nullptr;
}

SelfCheckReport run_selfcheck(const SelfCheckOptions& options) {
  const std::vector<std::pair<std::string, std::function<void()>>> suite{
      {"linalg.penrose_conditions", check_penrose},
      {"linalg.full_rank_broad", check_full_rank_broad},
      {"linalg.min_norm_matches_pinv", check_min_norm_matches_pinv},
      {"tasks.generator_consistency", check_generator_consistency},
      {"tasks.partition_cover", check_partition_cover},
      {"tasks.purity", check_task_purity},
      {"cocoa.one_step_convergence", check_one_step_convergence},
      {"cocoa.path_equivalence", check_path_equivalence},
      {"cocoa.determinism", check_cocoa_determinism},
      {"cocoa.single_node_square", check_k1_square},
      {"cocoa.underparameterized_convergence", check_underparameterized},
      {"netsim.monolithic_equivalence", [&] { check_network_equivalence(options.corrupt_aggregation_order); }},
      {"continual.latest_task_every_step", check_latest_task_every_step},
      {"continual.recurrence_fidelity", check_recurrence_fidelity},
      {"continual.determinism", check_continual_determinism},
      {"metrics.forgetting_is_mean", check_forgetting_mean},
      {"metrics.scale", check_metric_scaling},
      {"metrics.offline_oracle", check_offline_oracle},
  };

  SelfCheckReport report;
  for (const auto& [name, check] : suite) {
    CheckResult result{name, true, {}, 0};
    const auto start = std::chrono::steady_clock::now();
    try {
      check();
    } catch (const Violation& v) {
      result.passed = false;
      result.detail = v.message;
      result.seed = v.seed;
    } catch (const std::exception& e) {
      result.passed = false;
      result.detail = std::string("exception: ") + e.what();
    }
    if (options.log != nullptr) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      *options.log << (result.passed ? "[PASS] " : "[FAIL] ") << name << " (" << fmt(secs) << " s)";
      if (!result.passed) *options.log << ": " << result.detail << " [seed " << result.seed << "]";
      *options.log << '\n';
    }
    report.checks.push_back(std::move(result));
  }
  return report;
}

}  // namespace cocl
