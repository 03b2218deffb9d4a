#include "mb/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mb/kernels.hpp"

namespace mb {

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Vec matvec(const Mat& m, std::span<const double> v) {
  if (m.cols != v.size())
    throw std::invalid_argument("matvec: matrix has " +
                                std::to_string(m.cols) + " cols, vector has " +
                                std::to_string(v.size()) + " entries");
  Vec out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    out[i] = kernels::dot(m.row(i), v.data(), m.cols);
  return out;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("sq_dist: length mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  return kernels::sq_dist(a.data(), b.data(), a.size());
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void require_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v))
    throw std::runtime_error(std::string(what) + ": non-finite entry");
}

}  // namespace mb
