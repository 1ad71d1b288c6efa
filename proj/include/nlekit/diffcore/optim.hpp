#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nlekit/diffcore/layers.hpp"

namespace nlekit::diffcore {

/// lr0 * (1 + cos(pi * step / total)) / 2. Throws a range error when
/// step > total or total == 0.
double cosine_lr(std::uint64_t step, std::uint64_t total, double lr0);

template <typename T>
struct OptimizerState {
  double learning_rate = 0.01;
  double initial_lr = 0.01;
  double momentum = 0.9;
  std::uint64_t step = 0;
  std::uint64_t total_steps = 1;
  std::map<std::string, std::vector<T>> velocity;

  OptimizerState() = default;
  OptimizerState(double lr0, double momentum_, std::uint64_t total);

  /// Sets learning_rate from the cosine schedule at the current step.
  void apply_schedule() { learning_rate = cosine_lr(step, total_steps, initial_lr); }
};

/// v <- momentum * v + g; p <- p - lr * v, for every parameter, reading g
/// from the parameter's grad slot. Missing gradients raise a state error and
/// leave every parameter untouched.
template <typename T>
void sgd_step(OptimizerState<T>& state, const std::vector<ParamRef<T>>& params);

}  // namespace nlekit::diffcore
