#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cocl/linalg.hpp"
#include "cocl/tasks.hpp"

namespace cocl {

struct MetricRecord {
  std::size_t t = 0;
  double forgetting = 0.0;         // F_S(t), sums over every sequence entry up to t
  double forgetting_unique = 0.0;  // mean loss over the distinct tasks seen up to t
  double rel_step = 0.0;           // ||w_t - w_{t-1}||^2 / ||w_t||^2
  double dist_to_gen = 0.0;        // ||w_t - w*||
  bool diverged = false;
};

// (1/n) ||A w - y||^2.
double task_loss(const Task& task, const DenseVector& w);

// F_S(t) = (1/t) sum_{i<=t} task_loss(tasks[order[i] - 1], w). Each distinct
// task's loss is computed once and weighted by its occurrence count.
double forgetting(std::span<const Task> tasks, std::span<const std::size_t> order, const DenseVector& w,
                  std::size_t t);

// Mean task_loss over the distinct tasks occurring in order[0..t).
double forgetting_unique(std::span<const Task> tasks, std::span<const std::size_t> order, const DenseVector& w,
                         std::size_t t);

struct RelativeStep {
  double value = 0.0;
  bool degenerate = false;  // ||w_T|| == 0; value is +inf
};

RelativeStep relative_last_step(const DenseVector& w_last, const DenseVector& w_prev);

double distance_to_generator(const DenseVector& w, const DenseVector& w_star);

// Minimum-norm solution of the stacked offline system.
DenseVector offline_oracle(std::span<const Task> tasks);

}  // namespace cocl
