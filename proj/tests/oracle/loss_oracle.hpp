#pragma once

// Long-double reference implementations of the training losses, evaluated on
// logits. Used as the numeric side of the loss gradient checks: a double
// objective of size ~1 rounds at ~2e-16, which swamps central differences of
// coordinates whose gradient is below ~1e-5.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "divergence_oracle.hpp"

namespace oracle {

using Rows = std::vector<Dist>;

inline Rows softmax(std::span<const double> z, std::size_t n, std::size_t k, Real t) {
  Rows out(n, Dist(k));
  for (std::size_t i = 0; i < n; ++i) {
    Real m = z[i * k];
    for (std::size_t j = 1; j < k; ++j) m = std::max<Real>(m, z[i * k + j]);
    Real s = 0;
    for (std::size_t j = 0; j < k; ++j) s += out[i][j] = std::exp((z[i * k + j] - m) / t);
    for (auto& v : out[i]) v /= s;
  }
  return out;
}

inline Real cross_entropy(const Rows& p, const std::vector<std::size_t>& labels) {
  Real s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s -= std::log(clamp_renorm(p[i])[labels[i]]);
  return s / static_cast<Real>(p.size());
}

/// Rows of `columns` are the K NLE columns.
inline Real nle_learning(const Rows& teacher, const std::vector<std::size_t>& labels, const Rows& columns) {
  Real s = 0;
  for (std::size_t i = 0; i < teacher.size(); ++i) s += skld(teacher[i], columns[labels[i]]);
  return s / static_cast<Real>(teacher.size());
}

inline Real mean_kld(const Rows& target, const Rows& student) {
  Real s = 0;
  for (std::size_t i = 0; i < target.size(); ++i) s += kld(target[i], student[i]);
  return s / static_cast<Real>(target.size());
}

inline Real rtsl(const Rows& reference, const Rows& student) {
  return smoothed_l1(mutual_distance(reference), mutual_distance(student));
}

inline Real nle_rtsl(const Rows& target, const Rows& student, Real lambda) {
  return mean_kld(target, student) + lambda * rtsl(target, student);
}

}  // namespace oracle
