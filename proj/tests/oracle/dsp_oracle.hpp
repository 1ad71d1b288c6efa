#pragma once

// Direct long-double references for the feature front end: an O(N^2) DFT,
// scalar mel arithmetic and a loop-based log-mel projection.

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

using Real = long double;

/// |X_k|^2 for k in [0, nfft/2] of x zero-padded to nfft.
inline std::vector<Real> dft_power(const std::vector<Real>& x, std::size_t nfft) {
  std::vector<Real> out(nfft / 2 + 1);
  const Real two_pi = 2 * std::numbers::pi_v<Real>;
  for (std::size_t k = 0; k < out.size(); ++k) {
    Real re = 0, im = 0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const Real a = two_pi * static_cast<Real>(k * n % nfft) / static_cast<Real>(nfft);
      re += x[n] * std::cos(a);
      im -= x[n] * std::sin(a);
    }
    out[k] = re * re + im * im;
  }
  return out;
}

inline std::vector<Real> hann(std::size_t n) {
  std::vector<Real> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = Real(0.5) - Real(0.5) * std::cos(2 * std::numbers::pi_v<Real> * static_cast<Real>(i) / static_cast<Real>(n));
  return w;
}

inline Real mel(Real hz) { return 2595 * std::log10(1 + hz / 700); }
inline Real mel_inv(Real m) { return 700 * (std::pow(Real(10), m / 2595) - 1); }

/// log(max(sum_b fb[m][b] * power[b], floor)) for one frame.
inline std::vector<Real> log_mel_frame(const std::vector<std::vector<Real>>& fb, const std::vector<Real>& power,
                                       Real floor) {
  std::vector<Real> out(fb.size());
  for (std::size_t m = 0; m < fb.size(); ++m) {
    Real s = 0;
    for (std::size_t b = 0; b < power.size(); ++b) s += fb[m][b] * power[b];
    out[m] = std::log(s < floor ? floor : s);
  }
  return out;
}

}  // namespace oracle
