#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference version;
// an AVX2/FMA variant is compiled separately and picked at runtime when the
// CPU supports it. CRYSTALFLOW_SIMD=scalar|avx2|auto overrides the choice.

#include <complex>
#include <cstddef>

namespace crystalflow::kernels {

struct KernelTable {
  const char* name;

  /// Scalar-component propagator. `data` holds interleaved (u_hat, v_hat)
  /// pairs per frequency; `coeffs` holds (a, d, b, c) per frequency and the
  /// update is u' = a u + b v, v' = c u + d v.
  void (*propagate_pairs)(std::complex<double>* data, const double* coeffs, std::size_t count);

  /// sum_i va[i] * ub[i] - vb[i] * ua[i]
  double (*cross_sum)(const double* ua, const double* va, const double* ub, const double* vb,
                      std::size_t count);

  double (*dot)(const double* x, const double* y, std::size_t count);

  /// y[i] += w[i] * x[i]
  void (*weighted_accumulate)(double* y, const double* x, const double* w, std::size_t count);
};

const KernelTable& scalar_table();
/// nullptr when the AVX2 variants were not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();
/// Table selected for this process.
const KernelTable& active();

}  // namespace crystalflow::kernels
