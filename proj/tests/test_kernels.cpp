#include <doctest.h>

#include <array>
#include <random>
#include <vector>

#include "berrystack/kernels.hpp"

namespace k = berrystack::kernels;

namespace {

std::vector<double> random_matrix(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Textbook triple loop.
std::vector<double> naive(const std::vector<double>& a, const std::vector<double>& b,
                          std::size_t m, std::size_t n, std::size_t kk,
                          bool a_t, bool b_t) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < kk; ++p) {
        const double av = a_t ? a[p * m + i] : a[i * kk + p];
        const double bv = b_t ? b[j * kk + p] : b[p * n + j];
        c[i * n + j] += av * bv;
      }
  return c;
}

}  // namespace

TEST_CASE("gemm variants agree with the textbook triple loop") {
  std::mt19937_64 rng(3);
  using Dims = std::array<std::size_t, 3>;
  for (auto [m, n, kk] : {Dims{1, 1, 1}, Dims{3, 5, 7}, Dims{17, 9, 33},
                          Dims{64, 128, 96}}) {
    auto a = random_matrix(m * kk, rng);
    auto b = random_matrix(n * kk, rng);
    std::vector<double> c(m * n);

    k::serial::gemm_nt(a, b, c, m, n, kk);
    auto ref = naive(a, b, m, n, kk, false, true);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    k::serial::gemm_nn(a, b, c, m, n, kk);
    ref = naive(a, b, m, n, kk, false, false);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    k::serial::gemm_tn(a, b, c, m, n, kk);
    ref = naive(a, b, m, n, kk, true, false);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  std::mt19937_64 rng(11);
  const std::size_t m = 150, n = 70, kk = 130;
  auto a = random_matrix(m * kk, rng);
  auto b = random_matrix(n * kk, rng);
  auto bt = random_matrix(kk * n, rng);
  std::vector<double> cs(m * n), cp(m * n);

  k::serial::gemm_nt(a, b, cs, m, n, kk);
  k::parallel::gemm_nt(a, b, cp, m, n, kk);
  CHECK(cs == cp);

  k::serial::gemm_nn(a, bt, cs, m, n, kk);
  k::parallel::gemm_nn(a, bt, cp, m, n, kk);
  CHECK(cs == cp);

  auto at = random_matrix(kk * m, rng);
  k::serial::gemm_tn(at, bt, cs, m, n, kk);
  k::parallel::gemm_tn(at, bt, cp, m, n, kk);
  CHECK(cs == cp);
  CHECK(k::max_threads() >= 1);
}
