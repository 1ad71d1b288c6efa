#pragma once

// Shared FFTW plan cache. FFTW's planner is not thread-safe, so every plan in
// the process is created under one lock; executing a plan on fresh arrays
// (fftw_execute_dft_*) is safe concurrently.

#include <fftw3.h>

#include <cstddef>
#include <memory>

namespace nlekit::fft {

struct Free {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuf = std::unique_ptr<double, Free>;
using ComplexBuf = std::unique_ptr<fftw_complex, Free>;

inline RealBuf real_buffer(std::size_t n) { return RealBuf(fftw_alloc_real(n)); }
inline ComplexBuf complex_buffer(std::size_t n) { return ComplexBuf(fftw_alloc_complex(n)); }

/// Forward real-to-complex plan of length n (n/2+1 outputs).
fftw_plan r2c(std::size_t n);
/// Inverse complex-to-real plan of length n, unnormalized.
fftw_plan c2r(std::size_t n);

}  // namespace nlekit::fft
