#include "berrystack/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace berrystack::kernels {

namespace {

// Below this many multiply-adds the parallel kernels stay on one thread.
constexpr std::size_t kParallelThreshold = 1u << 15;

// Dot product with four interleaved partial sums, combined in a fixed order.
inline double dot(const double* x, const double* y, std::size_t k) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    s0 += x[p] * y[p];
    s1 += x[p + 1] * y[p + 1];
    s2 += x[p + 2] * y[p + 2];
    s3 += x[p + 3] * y[p + 3];
  }
  for (; p < k; ++p) s0 += x[p] * y[p];
  return (s0 + s1) + (s2 + s3);
}

inline void row_nt(const double* a, const double* b, double* c, std::size_t i,
                   std::size_t n, std::size_t k) {
  const double* ai = a + i * k;
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) ci[j] = dot(ai, b + j * k, k);
}

inline void row_tn(const double* a, const double* b, double* c, std::size_t i,
                   std::size_t m, std::size_t n, std::size_t k) {
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = a[p * m + i];
    if (aip == 0.0) continue;
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
  }
}

inline void row_nn(const double* a, const double* b, double* c, std::size_t i,
                   std::size_t n, std::size_t k) {
  const double* ai = a + i * k;
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = ai[p];
    if (aip == 0.0) continue;
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
  }
}

}  // namespace

namespace serial {

void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) row_nt(a.data(), b.data(), c.data(), i, n, k);
}

void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i)
    row_tn(a.data(), b.data(), c.data(), i, m, n, k);
}

void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) row_nn(a.data(), b.data(), c.data(), i, n, k);
}

}  // namespace serial

namespace parallel {

void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k) {
  const auto rows = static_cast<long long>(m);
  [[maybe_unused]] const bool big = m * n * k >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long long i = 0; i < rows; ++i)
    row_nt(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), n, k);
}

void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k) {
  const auto rows = static_cast<long long>(m);
  [[maybe_unused]] const bool big = m * n * k >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long long i = 0; i < rows; ++i)
    row_tn(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), m, n, k);
}

void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k) {
  const auto rows = static_cast<long long>(m);
  [[maybe_unused]] const bool big = m * n * k >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long long i = 0; i < rows; ++i)
    row_nn(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), n, k);
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace berrystack::kernels
