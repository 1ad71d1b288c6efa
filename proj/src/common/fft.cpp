#include "fft.hpp"

#include <map>
#include <mutex>
#include <string>

#include "nlekit/error.hpp"

namespace nlekit::fft {

namespace {

std::mutex mu;

// ESTIMATE keeps planning free of timing measurements, so the chosen
// algorithm, and therefore every output bit, is reproducible.
template <bool Forward>
fftw_plan make(std::size_t n) {
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mu);
  if (auto it = plans.find(n); it != plans.end()) return it->second;
  RealBuf re = real_buffer(n);
  ComplexBuf cx = complex_buffer(n / 2 + 1);
  fftw_plan p = Forward ? fftw_plan_dft_r2c_1d(static_cast<int>(n), re.get(), cx.get(), FFTW_ESTIMATE)
                        : fftw_plan_dft_c2r_1d(static_cast<int>(n), cx.get(), re.get(), FFTW_ESTIMATE);
  if (!p) fail(ErrorKind::dependency, "FFTW could not plan a transform of size " + std::to_string(n));
  plans.emplace(n, p);
  return p;
}

}  // namespace

fftw_plan r2c(std::size_t n) { return make<true>(n); }
fftw_plan c2r(std::size_t n) { return make<false>(n); }

}  // namespace nlekit::fft
