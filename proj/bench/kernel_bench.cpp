#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "berrystack/ensemble.hpp"
#include "berrystack/kernels.hpp"
#include "berrystack/model.hpp"
#include "berrystack/synth.hpp"

using namespace berrystack;

namespace {

std::vector<double> random_matrix(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Shapes of the head's forward pass: batch x features times weights^T.
template <auto Gemm>
void bm_gemm_nt(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t n = 512, k = 1024;
  const auto a = random_matrix(m * k, 1);
  const auto b = random_matrix(n * k, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Gemm(a, b, c, m, n, k);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * n * k));
}

const data::LabeledDataset& samples() {
  static const data::LabeledDataset ds = [] {
    synth::BispectralSpec spec;
    spec.samples = 64;
    spec.seed = 1;
    return synth::bispectral_dataset(spec);
  }();
  return ds;
}

void bm_extract(benchmark::State& state) {
  const auto ex = model::FeatureExtractor::surrogate(static_cast<std::size_t>(state.range(0)), 0);
  for (auto _ : state) {
    auto fs = model::extract_dataset(samples(), ex);
    benchmark::DoNotOptimize(fs.y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * samples().size()));
}

void bm_base_learners(benchmark::State& state) {
  auto ex = std::make_shared<const model::FeatureExtractor>(model::FeatureExtractor::surrogate(128, 0));
  const auto features = model::extract_dataset(data::random_oversample(samples(), 2), *ex);
  ensemble::EnsembleConfig cfg;
  cfg.learners = 4;
  cfg.base.fc = {64, 32};
  cfg.base.schedule.epochs = 5;
  cfg.parallel = state.range(0) != 0;
  for (auto _ : state) {
    auto learners = ensemble::train_base_learners(features, features, cfg, ex);
    benchmark::DoNotOptimize(learners.data());
  }
}

}  // namespace

BENCHMARK(bm_gemm_nt<kernels::serial::gemm_nt>)->Name("gemm_nt/serial")->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(bm_gemm_nt<kernels::parallel::gemm_nt>)->Name("gemm_nt/parallel")->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(bm_extract)->Name("extract_features")->Arg(256)->Arg(512);
BENCHMARK(bm_base_learners)->Name("base_learners/serial")->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_base_learners)->Name("base_learners/parallel")->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
