#include "crystalflow/kernels.hpp"

namespace crystalflow::kernels {

namespace {

void propagate_pairs(std::complex<double>* data, const double* coeffs, std::size_t count) {
  for (std::size_t k = 0; k < count; ++k) {
    const double a = coeffs[4 * k + 0];
    const double d = coeffs[4 * k + 1];
    const double b = coeffs[4 * k + 2];
    const double c = coeffs[4 * k + 3];
    const std::complex<double> u = data[2 * k];
    const std::complex<double> v = data[2 * k + 1];
    data[2 * k] = a * u + b * v;
    data[2 * k + 1] = c * u + d * v;
  }
}

double cross_sum(const double* ua, const double* va, const double* ub, const double* vb,
                 std::size_t count) {
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) s += va[i] * ub[i] - vb[i] * ua[i];
  return s;
}

double dot(const double* x, const double* y, std::size_t count) {
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) s += x[i] * y[i];
  return s;
}

void weighted_accumulate(double* y, const double* x, const double* w, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) y[i] += w[i] * x[i];
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", propagate_pairs, cross_sum, dot, weighted_accumulate};
  return table;
}

}  // namespace crystalflow::kernels
