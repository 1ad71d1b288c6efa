#include "nlekit/diffcore/gradcheck.hpp"

#include <cmath>

#include "nlekit/rng.hpp"

namespace nlekit::diffcore {

namespace {

void check_eps(double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) fail(ErrorKind::range, "grad_check: eps must lie in (0, 1e-3]");
}

void fold(GradCheckResult& r, double analytic, double numeric, const std::string& coord) {
  const double err = std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-8);
  if (r.worst_coordinate.empty() || err > r.max_relative_error) {
    r.max_relative_error = err;
    r.worst_coordinate = coord;
  }
}

}  // namespace

GradCheckResult check_scalar_gradient(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> analytic, std::vector<double> x, double eps,
                                      const std::string& label) {
  check_eps(eps);
  require(analytic.size() == x.size(), ErrorKind::input, "grad_check: analytic gradient length mismatch");
  GradCheckResult r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = f(x);
    x[i] = orig - eps;
    const double down = f(x);
    x[i] = orig;
    const std::string coord = label + "[" + std::to_string(i) + "]";
    if (!std::isfinite(up) || !std::isfinite(down)) fail(ErrorKind::numeric, "grad_check: non-finite value at " + coord);
    fold(r, analytic[i], (up - down) / (2.0 * eps), coord);
  }
  return r;
}

GradCheckResult grad_check(Layer<double>& layer, const Tensor<double>& input, double eps,
                           std::uint64_t projection_seed) {
  check_eps(eps);
  const Shape out_shape = layer.output_shape(input.shape());
  std::vector<double> proj(num_elements(out_shape));
  Rng rng(projection_seed);
  for (auto& r : proj) r = rng.normal();

  // The numeric side runs on a long-double copy: in double, the objective's
  // own rounding (~1e-16 |L|) divided by 2 eps exceeds the tolerance on
  // coordinates with small gradients.
  const std::unique_ptr<Layer<long double>> wide = layer.to_extended();
  Tensor<long double> wide_input = input.cast<long double>();
  auto objective = [&] {
    const Tensor<long double> y = wide->forward(wide_input, Mode::train);
    long double s = 0.0L;
    for (std::size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
    return s;
  };
  const long double h = eps;
  GradCheckResult result;
  auto sweep = [&](std::span<long double> values, std::span<const double> analytic, const std::string& label) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const long double orig = values[i];
      values[i] = orig + h;
      const long double up = objective();
      values[i] = orig - h;
      const long double down = objective();
      values[i] = orig;
      const std::string coord = label + "[" + std::to_string(i) + "]";
      if (!std::isfinite(up) || !std::isfinite(down)) fail(ErrorKind::numeric, "grad_check: non-finite value at " + coord);
      fold(result, analytic[i], static_cast<double>((up - down) / (2 * h)), coord);
    }
  };

  std::vector<std::vector<double>> saved;
  for (auto& b : layer.buffers()) saved.emplace_back(b.tensor->data().begin(), b.tensor->data().end());
  layer.forward(input, Mode::train);
  const Tensor<double> dx = layer.backward(Tensor<double>(out_shape, proj));
  std::size_t k = 0;
  for (auto& b : layer.buffers()) {
    std::copy(saved[k].begin(), saved[k].end(), b.tensor->data().begin());
    ++k;
  }

  sweep(wide_input.data(), dx.data(), "input");
  auto params = layer.parameters();
  auto wide_params = wide->parameters();
  for (std::size_t p = 0; p < params.size(); ++p)
    sweep(wide_params[p].tensor->data(), params[p].tensor->grad(), params[p].name);
  return result;
}

}  // namespace nlekit::diffcore
