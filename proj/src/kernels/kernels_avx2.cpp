// Compiled with -mavx2 -mfma. Only reached through avx2_table() after a
// runtime CPU check.

#include <immintrin.h>

#include "crystalflow/kernels.hpp"

namespace crystalflow::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void propagate_pairs(std::complex<double>* data, const double* coeffs, std::size_t count) {
  double* p = reinterpret_cast<double*>(data);
  for (std::size_t k = 0; k < count; ++k) {
    // x = (ur, ui, vr, vi), xs = (vr, vi, ur, ui)
    const __m256d x = _mm256_loadu_pd(p + 4 * k);
    const __m256d xs = _mm256_permute2f128_pd(x, x, 0x01);
    const __m256d c = _mm256_loadu_pd(coeffs + 4 * k);  // (a, d, b, c)
    const __m256d diag = _mm256_permute4x64_pd(c, 0x50);  // (a, a, d, d)
    const __m256d off = _mm256_permute4x64_pd(c, 0xFA);   // (b, b, c, c)
    _mm256_storeu_pd(p + 4 * k, _mm256_fmadd_pd(diag, x, _mm256_mul_pd(off, xs)));
  }
}

double cross_sum(const double* ua, const double* va, const double* ub, const double* vb,
                 std::size_t count) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(va + i), _mm256_loadu_pd(ub + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(vb + i), _mm256_loadu_pd(ua + i), acc1);
  }
  double s = hsum(_mm256_sub_pd(acc0, acc1));
  for (; i < count; ++i) s += va[i] * ub[i] - vb[i] * ua[i];
  return s;
}

double dot(const double* x, const double* y, std::size_t count) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= count; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < count; ++i) s += x[i] * y[i];
  return s;
}

void weighted_accumulate(double* y, const double* x, const double* w, std::size_t count) {
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    __m256d acc = _mm256_loadu_pd(y + i);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i), acc);
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < count; ++i) y[i] += w[i] * x[i];
}

}  // namespace

const KernelTable& table() {
  static const KernelTable t{"avx2", propagate_pairs, cross_sum, dot, weighted_accumulate};
  return t;
}

}  // namespace crystalflow::kernels::avx2
