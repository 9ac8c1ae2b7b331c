#pragma once

// Thin FFTW wrapper for batched multi-dimensional transforms of interleaved
// data: `components` complex values per lattice site, site-major.

#include <complex>
#include <cstddef>
#include <vector>

namespace crystalflow {

class FftPlan {
 public:
  /// sign = +1 computes sum_x e^{+i theta x} f(x); sign = -1 the conjugate
  /// kernel. No normalisation is applied.
  FftPlan(const std::vector<std::size_t>& shape, std::size_t components, int sign);

  /// In-place transform of sites() * components() values.
  void execute(std::complex<double>* data) const;
  std::size_t sites() const { return sites_; }
  std::size_t components() const { return components_; }

 private:
  void* plan_ = nullptr;  // fftw_plan, owned by a process-wide cache
  std::size_t sites_ = 0;
  std::size_t components_ = 0;
};

}  // namespace crystalflow
