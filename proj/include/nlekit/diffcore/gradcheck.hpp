#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nlekit/diffcore/layers.hpp"

namespace nlekit::diffcore {

struct GradCheckResult {
  double max_relative_error = 0.0;
  /// Coordinate where the maximum occurred, e.g. "input[3]" or "weight[7]".
  std::string worst_coordinate;
};

/// Central-difference check of a scalar function against its analytic
/// gradient: max_i |analytic_i - numeric_i| / max(|numeric_i|, 1e-8).
/// `f` is evaluated at x +/- eps e_i; a non-finite value raises a numeric
/// error naming the coordinate.
GradCheckResult check_scalar_gradient(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> analytic, std::vector<double> x, double eps,
                                      const std::string& label = "x");

/// Checks a layer's backward() against central differences of the scalar
/// L = sum(r * forward(input)) for a seeded random projection r, covering
/// every input coordinate and every parameter coordinate. Forward runs in
/// train mode. Requires eps in (0, 1e-3].
GradCheckResult grad_check(Layer<double>& layer, const Tensor<double>& input, double eps = 1e-5,
                           std::uint64_t projection_seed = 1);

}  // namespace nlekit::diffcore
