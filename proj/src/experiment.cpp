#include "cocl/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "cocl/error.hpp"
#include "cocl/parallel.hpp"

namespace cocl {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_uint(std::string_view field, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(field), "expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::size_t> parse_list(std::string_view field, std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (item.empty()) throw ConfigError(std::string(field), "empty list entry");
    if (const auto dots = item.find(".."); dots != std::string_view::npos) {
      const auto lo = parse_uint(field, item.substr(0, dots));
      const auto hi = parse_uint(field, item.substr(dots + 2));
      if (hi < lo) throw ConfigError(std::string(field), "range '" + std::string(item) + "' is decreasing");
      for (auto v = lo; v <= hi; ++v) out.push_back(static_cast<std::size_t>(v));
    } else {
      out.push_back(static_cast<std::size_t>(parse_uint(field, item)));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_bool(std::string_view field, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "yes" || text == "1" || text == "on") return true;
  if (text == "false" || text == "no" || text == "0" || text == "off") return false;
  throw ConfigError(std::string(field), "expected true or false, got '" + std::string(text) + "'");
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string metadata_line(const ExperimentConfig& config, std::string_view command) {
  std::ostringstream out;
  out << "cocl " << command << " name=" << config.name << " generated=" << timestamp_utc() << " eval_stride=";
  if (config.eval_stride != 0) {
    out << config.eval_stride;
  } else if (config.schedule == ScheduleMode::one_shot) {
    out << "1(auto)";
  } else {
    out << "M*ceil(1000/M)(auto,cycle-aligned)";
  }
  return out.str();
}

double median(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  // NaN sorts last.
  std::sort(xs.begin(), xs.end(), [](double a, double b) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return a < b;
  });
  const std::size_t mid = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

void write_metadata(std::ostream& out, std::string_view metadata) {
  if (!metadata.empty()) out << "# " << metadata << '\n';
}

std::filesystem::path trace_path(const ExperimentConfig& config, std::size_t n, std::size_t m, std::uint64_t seed) {
  return config.out / "traces" /
         ("trace_n" + std::to_string(n) + "_M" + std::to_string(m) + "_seed" + std::to_string(seed) + ".csv");
}

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  writer(out);
}

// Piecewise-linear approximation of the viridis colormap.
std::string color_for(double u) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140},
                                                                {94, 201, 98}, {253, 231, 37}}};
  u = std::clamp(u, 0.0, 1.0) * static_cast<double>(stops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(u), stops.size() - 2);
  const double f = u - static_cast<double>(i);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
  return buf;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::map<std::string, std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(line_no) + ": missing key");
    if (value.empty()) throw ConfigError(key, "missing value");
    if (!seen.emplace(key, std::string(value)).second) throw ConfigError(key, "given more than once");

    if (key == "name") {
      config.name = std::string(value);
    } else if (key == "p") {
      config.p = parse_uint(key, value);
    } else if (key == "partition") {
      config.partition = parse_list(key, value);
    } else if (key == "schedule") {
      if (value == "one_shot") {
        config.schedule = ScheduleMode::one_shot;
      } else if (value == "cyclic") {
        config.schedule = ScheduleMode::cyclic;
      } else {
        throw ConfigError(key, "expected one_shot or cyclic, got '" + std::string(value) + "'");
      }
    } else if (key == "repeats") {
      config.repeats = parse_uint(key, value);
    } else if (key == "generator") {
      if (value == "shared") {
        config.generator = GeneratorKind::shared;
      } else if (value == "alternating") {
        config.generator = GeneratorKind::alternating;
      } else {
        throw ConfigError(key, "expected shared or alternating, got '" + std::string(value) + "'");
      }
    } else if (key == "n_m") {
      config.n_values = parse_list(key, value);
    } else if (key == "M") {
      config.m_values = parse_list(key, value);
    } else if (key == "seeds") {
      config.seeds = parse_uint(key, value);
    } else if (key == "seed_offset") {
      config.seed_offset = parse_uint(key, value);
    } else if (key == "T_c") {
      config.inner_iterations = parse_uint(key, value);
    } else if (key == "eval_stride") {
      config.eval_stride = parse_uint(key, value);
    } else if (key == "out") {
      config.out = std::string(value);
    } else if (key == "force_iterative") {
      config.force_iterative = parse_bool(key, value);
    } else if (key == "traces") {
      config.traces = parse_bool(key, value);
    } else if (key == "svg") {
      config.svg = parse_bool(key, value);
    } else if (key == "threads") {
      config.threads = parse_uint(key, value);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate(const ExperimentConfig& config) {
  if (config.p == 0) throw ConfigError("p", "must be >= 1");
  if (config.partition.empty()) throw ConfigError("partition", "needs at least one block");
  std::size_t sum = 0;
  for (std::size_t s : config.partition) {
    if (s == 0) throw ConfigError("partition", "block sizes must be >= 1");
    sum += s;
  }
  if (sum != config.p) {
    throw ConfigError("partition", "sizes sum to " + std::to_string(sum) + " but p = " + std::to_string(config.p));
  }
  if (config.n_values.empty()) throw ConfigError("n_m", "needs at least one value");
  for (std::size_t n : config.n_values) {
    if (n == 0) throw ConfigError("n_m", "values must be >= 1");
  }
  if (config.m_values.empty()) throw ConfigError("M", "needs at least one value");
  for (std::size_t m : config.m_values) {
    if (m == 0) throw ConfigError("M", "values must be >= 1");
  }
  if (config.seeds == 0) throw ConfigError("seeds", "must be >= 1");
  if (config.schedule == ScheduleMode::cyclic && config.repeats == 0) throw ConfigError("repeats", "must be >= 1");
  if (config.inner_iterations == 0) throw ConfigError("T_c", "must be >= 1");
}

std::vector<std::string> preset_names() { return {"fig1_2", "fig3_4", "fig5", "fig6", "fig7"}; }

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  c.name = std::string(name);
  c.out = std::string(name);
  if (name == "fig1_2") {
    // Each task once; final step size and forgetting over the (n_m, M) grid.
    c.schedule = ScheduleMode::one_shot;
    c.traces = false;
    c.svg = true;
  } else if (name == "fig3_4") {
    c.schedule = ScheduleMode::cyclic;
    c.repeats = 1000;
    c.traces = false;
    c.svg = true;
  } else if (name == "fig5") {
    // Forgetting over t around the N = p streak at n_m = 2.
    c.schedule = ScheduleMode::cyclic;
    c.repeats = 1000;
    c.n_values = {2};
    c.m_values = {40, 60, 70, 75, 80, 85, 90, 100, 160};
  } else if (name == "fig6") {
    c.schedule = ScheduleMode::cyclic;
    c.repeats = 1000;
    c.n_values = {2};
    c.traces = false;
  } else if (name == "fig7") {
    c.schedule = ScheduleMode::cyclic;
    c.repeats = 1000;
    c.generator = GeneratorKind::alternating;
    c.n_values = {2};
    c.m_values = {2, 10, 150};
  } else {
    throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
  }
  return c;
}

std::size_t effective_eval_stride(const ExperimentConfig& config, std::size_t unique_tasks) {
  if (config.eval_stride != 0) return config.eval_stride;
  if (config.schedule == ScheduleMode::one_shot) return 1;
  const std::size_t cycles = (1000 + unique_tasks - 1) / unique_tasks;
  return cycles * unique_tasks;
}

std::string_view to_string(CellStatus status) {
  switch (status) {
    case CellStatus::ok:
      return "ok";
    case CellStatus::diverged:
      return "diverged";
    case CellStatus::skipped:
      return "skipped";
  }
  return "unknown";
}

bool cell_skipped(const ExperimentConfig& config, std::size_t n) {
  return n >= *std::min_element(config.partition.begin(), config.partition.end());
}

RunTrace run_single(const ExperimentConfig& config, std::size_t n, std::size_t m, std::uint64_t seed) {
  const TaskSchedule schedule{config.schedule, m, config.repeats};
  const GeneratorSpec generators = config.generator == GeneratorKind::shared ? GeneratorSpec::shared(config.p)
                                                                             : GeneratorSpec::alternating(config.p);
  const TaskSequence seq = build_sequence(schedule, generators, n, seed);
  const Partitioning partition = make_partition(config.p, config.partition);

  ContinualConfig cc;
  cc.cocoa.max_inner_iterations = config.inner_iterations;
  cc.cocoa.mode = cell_skipped(config, n) ? SolveMode::iterative : SolveMode::automatic;
  cc.eval_stride = effective_eval_stride(config, m);
  cc.reference = generators.reference();
  return run_continual(seq.tasks, seq.order, partition, cc);
}

SweepResult run_sweep(const ExperimentConfig& config, const SweepOptions& options) {
  validate(config);
  const std::string metadata = metadata_line(config, options.command);
  const bool write_traces = options.write_files && config.traces;
  if (options.write_files) std::filesystem::create_directories(config.out);
  if (write_traces) std::filesystem::create_directories(config.out / "traces");

  SweepResult result;
  struct Job {
    std::size_t cell;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t n : config.n_values) {
    for (std::size_t m : config.m_values) {
      CellResult cell;
      cell.n = n;
      cell.m = m;
      cell.seeds.resize(config.seeds);
      for (std::size_t s = 0; s < config.seeds; ++s) cell.seeds[s].seed = config.seed_offset + s;
      if (cell_skipped(config, n) && !config.force_iterative) {
        cell.status = CellStatus::skipped;
        cell.note = "n_m >= min p_k: local problems are not overparameterized";
        for (auto& s : cell.seeds) s.status = CellStatus::skipped;
      } else {
        for (std::size_t s = 0; s < config.seeds; ++s) jobs.push_back({result.cells.size(), s});
      }
      result.cells.push_back(std::move(cell));
    }
  }

  const std::size_t threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  std::mutex progress_mutex;
  std::size_t done = 0;
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    CellResult& cell = result.cells[jobs[j].cell];
    SeedOutcome& outcome = cell.seeds[jobs[j].seed];
    const RunTrace trace = run_single(config, cell.n, cell.m, outcome.seed);
    outcome.final = trace.records.back();
    outcome.status = trace.diverged ? CellStatus::diverged : CellStatus::ok;
    if (write_traces) {
      write_file(trace_path(config, cell.n, cell.m, outcome.seed),
                 [&](std::ostream& out) { write_trace_csv(out, trace, metadata); });
    }
    if (options.progress != nullptr) {
      std::lock_guard lock(progress_mutex);
      ++done;
      *options.progress << "[" << done << "/" << jobs.size() << "] n_m=" << cell.n << " M=" << cell.m
                        << " seed=" << outcome.seed << " " << to_string(outcome.status) << '\n';
    }
  });

  for (auto& cell : result.cells) {
    if (cell.status == CellStatus::skipped) continue;
    std::vector<double> f, r, d;
    for (const auto& s : cell.seeds) {
      f.push_back(s.final.forgetting);
      r.push_back(s.final.rel_step);
      d.push_back(s.final.dist_to_gen);
      if (s.status == CellStatus::diverged) ++cell.diverged_seeds;
    }
    cell.median_forgetting = median(f);
    cell.median_rel_step = median(r);
    cell.median_dist = median(d);
    cell.status = cell.diverged_seeds > 0 ? CellStatus::diverged : CellStatus::ok;
  }

  if (options.write_files) {
    write_file(config.out / "summary.csv", [&](std::ostream& out) { write_summary_csv(out, result, metadata); });
    write_file(config.out / "cells.csv", [&](std::ostream& out) { write_cells_csv(out, result, metadata); });
    if (config.svg) {
      write_file(config.out / "heatmap_forgetting.svg", [&](std::ostream& out) {
        out << heatmap_svg(result, HeatmapMetric::forgetting, config.name + ": median final forgetting");
      });
      write_file(config.out / "heatmap_rel_step.svg", [&](std::ostream& out) {
        out << heatmap_svg(result, HeatmapMetric::rel_step, config.name + ": median relative last step");
      });
    }
  }
  return result;
}

void write_trace_csv(std::ostream& out, const RunTrace& trace, std::string_view metadata) {
  write_metadata(out, metadata);
  out << "t,forgetting,forgetting_unique,rel_step,dist_to_gen,diverged\n";
  for (const auto& r : trace.records) {
    out << r.t << ',' << format_number(r.forgetting) << ',' << format_number(r.forgetting_unique) << ','
        << format_number(r.rel_step) << ',' << format_number(r.dist_to_gen) << ',' << (r.diverged ? 1 : 0) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const SweepResult& result, std::string_view metadata) {
  write_metadata(out, metadata);
  out << "n_m,M,seed,status,final_forgetting,final_forgetting_unique,final_rel_step,final_dist,diverged\n";
  for (const auto& cell : result.cells) {
    for (const auto& s : cell.seeds) {
      out << cell.n << ',' << cell.m << ',' << s.seed << ',' << to_string(s.status) << ',';
      if (s.status == CellStatus::skipped) {
        out << ",,,,\n";
        continue;
      }
      out << format_number(s.final.forgetting) << ',' << format_number(s.final.forgetting_unique) << ','
          << format_number(s.final.rel_step) << ',' << format_number(s.final.dist_to_gen) << ','
          << (s.status == CellStatus::diverged ? 1 : 0) << '\n';
    }
  }
}

void write_cells_csv(std::ostream& out, const SweepResult& result, std::string_view metadata) {
  write_metadata(out, metadata);
  out << "n_m,M,status,seeds,diverged_seeds,median_forgetting,median_rel_step,median_dist\n";
  for (const auto& cell : result.cells) {
    out << cell.n << ',' << cell.m << ',' << to_string(cell.status) << ',' << cell.seeds.size() << ','
        << cell.diverged_seeds << ',';
    if (cell.status == CellStatus::skipped) {
      out << ",,\n";
      continue;
    }
    out << format_number(cell.median_forgetting) << ',' << format_number(cell.median_rel_step) << ','
        << format_number(cell.median_dist) << '\n';
  }
}

std::string heatmap_svg(const SweepResult& result, HeatmapMetric metric, std::string_view title) {
  std::vector<std::size_t> ns, ms;
  for (const auto& c : result.cells) {
    if (std::find(ns.begin(), ns.end(), c.n) == ns.end()) ns.push_back(c.n);
    if (std::find(ms.begin(), ms.end(), c.m) == ms.end()) ms.push_back(c.m);
  }
  auto value_of = [&](const CellResult& c) {
    switch (metric) {
      case HeatmapMetric::forgetting:
        return c.median_forgetting;
      case HeatmapMetric::rel_step:
        return c.median_rel_step;
      case HeatmapMetric::dist_to_gen:
        return c.median_dist;
    }
    return 0.0;
  };
  constexpr double floor_value = 1e-35;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& c : result.cells) {
    if (c.status == CellStatus::skipped) continue;
    const double v = value_of(c);
    if (!std::isfinite(v)) continue;
    const double l = std::log10(std::max(v, floor_value));
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  if (!(lo <= hi)) lo = hi = 0.0;

  constexpr int cell_w = 44, cell_h = 26, left = 60, top = 40, legend = 90;
  const int width = left + static_cast<int>(ms.size()) * cell_w + legend;
  const int height = top + static_cast<int>(ns.size()) * cell_h + 50;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << title << "</text>\n";
  for (const auto& c : result.cells) {
    const auto col = std::find(ms.begin(), ms.end(), c.m) - ms.begin();
    const auto row = std::find(ns.begin(), ns.end(), c.n) - ns.begin();
    const int x = left + static_cast<int>(col) * cell_w;
    const int y = top + static_cast<int>(row) * cell_h;
    std::string fill = "#ffffff";
    std::string label;
    if (c.status != CellStatus::skipped) {
      const double v = value_of(c);
      if (std::isfinite(v)) {
        const double l = std::log10(std::max(v, floor_value));
        fill = color_for(hi > lo ? (l - lo) / (hi - lo) : 0.5);
      } else {
        fill = "#b0b0b0";
        label = "div";
      }
    } else {
      label = "skip";
    }
    svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w << "\" height=\"" << cell_h
        << "\" fill=\"" << fill << "\" stroke=\"#ffffff\"/>\n";
    if (!label.empty()) {
      svg << "<text x=\"" << x + 8 << "\" y=\"" << y + 17 << "\">" << label << "</text>\n";
    }
  }
  for (std::size_t i = 0; i < ms.size(); ++i) {
    svg << "<text x=\"" << left + static_cast<int>(i) * cell_w + 10 << "\" y=\""
        << top + static_cast<int>(ns.size()) * cell_h + 16 << "\">" << ms[i] << "</text>\n";
  }
  for (std::size_t i = 0; i < ns.size(); ++i) {
    svg << "<text x=\"" << left - 30 << "\" y=\"" << top + static_cast<int>(i) * cell_h + 17 << "\">" << ns[i]
        << "</text>\n";
  }
  const int axis_y = top + static_cast<int>(ns.size()) * cell_h + 36;
  svg << "<text x=\"" << left << "\" y=\"" << axis_y << "\">M</text>\n";
  svg << "<text x=\"8\" y=\"" << top - 6 << "\">n_m</text>\n";
  const int lx = left + static_cast<int>(ms.size()) * cell_w + 16;
  const int lh = static_cast<int>(ns.size()) * cell_h;
  constexpr int steps = 20;
  for (int i = 0; i < steps; ++i) {
    const double u = 1.0 - static_cast<double>(i) / (steps - 1);
    svg << "<rect x=\"" << lx << "\" y=\"" << top + i * lh / steps << "\" width=\"14\" height=\"" << lh / steps + 1
        << "\" fill=\"" << color_for(u) << "\"/>\n";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "1e%.1f", hi);
  svg << "<text x=\"" << lx + 18 << "\" y=\"" << top + 10 << "\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof buf, "1e%.1f", lo);
  svg << "<text x=\"" << lx + 18 << "\" y=\"" << top + lh << "\">" << buf << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cocl
