#include "nlekit/diffcore/optim.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace nlekit::diffcore {

double cosine_lr(std::uint64_t step, std::uint64_t total, double lr0) {
  if (total == 0) fail(ErrorKind::range, "cosine_lr: total steps must be positive");
  if (step > total)
    fail(ErrorKind::range, "cosine_lr: step " + std::to_string(step) + " exceeds total " + std::to_string(total));
  if (step == 0) return lr0;
  if (step == total) return 0.0;
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

template <typename T>
OptimizerState<T>::OptimizerState(double lr0, double momentum_, std::uint64_t total)
    : learning_rate(lr0), initial_lr(lr0), momentum(momentum_), total_steps(total) {
  require(lr0 > 0.0, ErrorKind::config, "optimizer: learning rate must be positive");
  require(momentum_ >= 0.0 && momentum_ < 1.0, ErrorKind::config, "optimizer: momentum must lie in [0, 1)");
  require(total > 0, ErrorKind::config, "optimizer: total steps must be positive");
}

template <typename T>
void sgd_step(OptimizerState<T>& state, const std::vector<ParamRef<T>>& params) {
  if (state.step >= state.total_steps)
    fail(ErrorKind::state, "sgd_step: step counter already at total steps (" + std::to_string(state.total_steps) + ")");
  for (const auto& p : params)
    if (!p.tensor->has_grad()) fail(ErrorKind::state, "sgd_step: missing gradient for parameter '" + p.name + "'");

  const double lr = state.learning_rate, mu = state.momentum;
  for (const auto& p : params) {
    auto& v = state.velocity[p.name];
    if (v.size() != p.tensor->size()) v.assign(p.tensor->size(), T(0));
    auto values = p.tensor->data();
    auto grads = std::as_const(*p.tensor).grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      v[i] = static_cast<T>(mu * v[i] + grads[i]);
      values[i] = static_cast<T>(values[i] - lr * v[i]);
    }
  }
  ++state.step;
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;
template void sgd_step<float>(OptimizerState<float>&, const std::vector<ParamRef<float>>&);
template void sgd_step<double>(OptimizerState<double>&, const std::vector<ParamRef<double>>&);

}  // namespace nlekit::diffcore
