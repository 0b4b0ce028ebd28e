#pragma once

#include <cstddef>
#include <span>

// Dense matrix kernels used by the network engine and the feature extractor.
//
// Every kernel exists twice: a plain serial reference and an OpenMP version
// that partitions output rows across threads. Each output element is summed
// in the same order by both, so results are bit-identical; tests rely on it.
//
// All matrices are row-major. The output is overwritten, not accumulated.

namespace berrystack::kernels {

namespace serial {

// C[m x n] = A[m x k] * B[n x k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k);

// C[m x n] = A[k x m]^T * B[k x n]
void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k);

// C[m x n] = A[m x k] * B[k x n]
void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k);

}  // namespace serial

namespace parallel {

void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k);
void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k);
void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, std::size_t m, std::size_t n, std::size_t k);

}  // namespace parallel

// Default dispatch used by the library.
using parallel::gemm_nn;
using parallel::gemm_nt;
using parallel::gemm_tn;

// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace berrystack::kernels
