#pragma once

// Independent long-double reference for the divergence family. Written
// directly from the definitions (explicit loops, all N^2 ordered pairs) and
// shares no code with the library.

#include <cmath>
#include <vector>

namespace oracle {

using Real = long double;
using Dist = std::vector<Real>;

inline constexpr Real kFloor = 1e-8L;

inline Dist clamp_renorm(const Dist& p) {
  Dist q(p.size());
  Real s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    q[i] = p[i] < kFloor ? kFloor : p[i];
    s += q[i];
  }
  for (auto& v : q) v /= s;
  return q;
}

inline Real kld(const Dist& p_raw, const Dist& q_raw) {
  const Dist p = clamp_renorm(p_raw), q = clamp_renorm(q_raw);
  Real s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

inline Real skld(const Dist& p, const Dist& q) { return (kld(p, q) + kld(q, p)) / 2; }

inline Real smoothed_l1(Real x, Real y) {
  const Real d = std::fabs(x - y);
  return d <= 1 ? d * d / 2 : d - Real(0.5);
}

inline Real mutual_distance(const std::vector<Dist>& d) {
  Real s = 0;
  for (const auto& a : d)
    for (const auto& b : d) s += skld(a, b);
  const Real n = static_cast<Real>(d.size());
  return s / (n * n);
}

}  // namespace oracle
