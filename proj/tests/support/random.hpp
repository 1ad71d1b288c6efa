#pragma once

#include <cmath>
#include <vector>

#include "nlekit/divloss/divloss.hpp"
#include "nlekit/rng.hpp"

namespace testsupport {

using nlekit::divloss::Matrix;

/// Flat Dirichlet draw.
inline std::vector<double> random_simplex(nlekit::Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& v : p) {
    double u;
    do u = rng.uniform();
    while (u <= 0.0);
    v = -std::log(u);
    s += v;
  }
  for (auto& v : p) v /= s;
  return p;
}

inline Matrix random_simplex_rows(nlekit::Rng& rng, std::size_t n, std::size_t k) {
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = random_simplex(rng, k);
    for (std::size_t j = 0; j < k; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p[j];
  }
  return m;
}

inline Matrix random_normal(nlekit::Rng& rng, std::size_t n, std::size_t k, double scale = 1.0) {
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline Matrix random_one_hot(nlekit::Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = rng.below(k);
  return nlekit::divloss::one_hot(labels, k);
}

inline std::vector<double> flatten(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

inline Matrix unflatten(std::span<const double> x, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  std::copy(x.begin(), x.end(), m.data());
  return m;
}

}  // namespace testsupport
