#include "mb/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace mb::kernels {

namespace {

Backend detect() {
#if defined(__x86_64__)
  if (__builtin_cpu_supports("avx2")) return Backend::avx2;
#endif
  return Backend::scalar;
}

Backend initial() {
  if (const char* env = std::getenv("MB_KERNEL_BACKEND")) {
    const std::string_view v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && backend_available(Backend::avx2)) return Backend::avx2;
  }
  return detect();
}

Backend& current() {
  static Backend b = initial();
  return b;
}

}  // namespace

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(__x86_64__)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() { return current(); }

bool set_backend(Backend b) {
  if (!backend_available(b)) return false;
  current() = b;
  return true;
}

std::string_view backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

double dot(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__)
  if (current() == Backend::avx2) return detail::dot_avx2(a, b, n);
#endif
  return detail::dot_scalar(a, b, n);
}

double sq_dist(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__)
  if (current() == Backend::avx2) return detail::sq_dist_avx2(a, b, n);
#endif
  return detail::sq_dist_scalar(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#if defined(__x86_64__)
  if (current() == Backend::avx2) return detail::axpy_avx2(alpha, x, y, n);
#endif
  detail::axpy_scalar(alpha, x, y, n);
}

void diff_axpy(double alpha, const double* a, const double* b, double* y,
               std::size_t n) {
#if defined(__x86_64__)
  if (current() == Backend::avx2)
    return detail::diff_axpy_avx2(alpha, a, b, y, n);
#endif
  detail::diff_axpy_scalar(alpha, a, b, y, n);
}

}  // namespace mb::kernels
