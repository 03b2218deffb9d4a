#pragma once
// Dense f64 kernels with runtime-selected SIMD variants.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. Both follow the same fixed evaluation order: reductions accumulate
// in four independent lanes over the vectorizable prefix, the lanes are summed
// left to right, and the tail elements are appended sequentially. Elementwise
// kernels keep multiply and add as separate operations. Under -ffp-contract=off
// this makes every backend produce bit-identical results, which the kernel
// tests assert exactly.

#include <cstddef>
#include <string_view>

namespace mb::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_available(Backend b);
// Returns false and leaves the dispatch unchanged if b is unavailable.
bool set_backend(Backend b);
std::string_view backend_name(Backend b);

// sum_i a[i]*b[i]
double dot(const double* a, const double* b, std::size_t n);
// sum_i (a[i]-b[i])^2
double sq_dist(const double* a, const double* b, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
// y += alpha * (a - b)
void diff_axpy(double alpha, const double* a, const double* b, double* y,
               std::size_t n);

// Raw entry points, exposed so the tests can compare backends directly.
namespace detail {
double dot_scalar(const double* a, const double* b, std::size_t n);
double sq_dist_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void diff_axpy_scalar(double alpha, const double* a, const double* b, double* y,
                      std::size_t n);
#if defined(__x86_64__)
double dot_avx2(const double* a, const double* b, std::size_t n);
double sq_dist_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void diff_axpy_avx2(double alpha, const double* a, const double* b, double* y,
                    std::size_t n);
#endif
}  // namespace detail

}  // namespace mb::kernels
