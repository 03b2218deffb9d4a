#pragma once
// Minimal dense containers shared by all modules. Everything is 64-bit float:
// the variance measurements downstream span several orders of magnitude and
// must not be polluted by single-precision noise.

#include <cstddef>
#include <span>
#include <vector>

namespace mb {

using Vec = std::vector<double>;

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;  // row-major, data.size() == rows * cols

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  std::span<double> row_span(std::size_t i) { return {row(i), cols}; }
  std::span<const double> row_span(std::size_t i) const {
    return {row(i), cols};
  }
  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  static Mat identity(std::size_t n);
};

// Standard matrix-vector product; throws on dimension mismatch.
Vec matvec(const Mat& m, std::span<const double> v);

// Squared Euclidean distance; throws on dimension mismatch.
double sq_dist(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);
// Throws std::runtime_error naming `what` if v contains NaN or Inf.
void require_finite(std::span<const double> v, const char* what);

}  // namespace mb
