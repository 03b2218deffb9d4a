// Scalar reference kernels. These define the numerical semantics that the
// SIMD variants must reproduce bit-exactly: four-lane strided accumulation
// over the vectorizable prefix, lanes summed left to right, sequential tail.

#include "mb/kernels.hpp"

namespace mb::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double lane0 = 0.0, lane1 = 0.0, lane2 = 0.0, lane3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lane0 += a[i] * b[i];
    lane1 += a[i + 1] * b[i + 1];
    lane2 += a[i + 2] * b[i + 2];
    lane3 += a[i + 3] * b[i + 3];
  }
  double acc = ((lane0 + lane1) + lane2) + lane3;
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sq_dist_scalar(const double* a, const double* b, std::size_t n) {
  double lane0 = 0.0, lane1 = 0.0, lane2 = 0.0, lane3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double d0 = a[i] - b[i];
    const double d1 = a[i + 1] - b[i + 1];
    const double d2 = a[i + 2] - b[i + 2];
    const double d3 = a[i + 3] - b[i + 3];
    lane0 += d0 * d0;
    lane1 += d1 * d1;
    lane2 += d2 * d2;
    lane3 += d3 * d3;
  }
  double acc = ((lane0 + lane1) + lane2) + lane3;
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void diff_axpy_scalar(double alpha, const double* a, const double* b, double* y,
                      std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * (a[i] - b[i]);
}

}  // namespace mb::kernels::detail
