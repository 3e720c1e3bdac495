#include <benchmark/benchmark.h>

#include <random>

#include "nmtune/io/fmat.hpp"
#include "nmtune/matrix.hpp"
#include "nmtune/noise.hpp"
#include "nmtune/regularizers.hpp"
#include "nmtune/spectrum.hpp"
#include "nmtune/svd.hpp"

namespace {

using nmtune::Matrix;

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (double& v : m.values()) v = n(gen);
  return m;
}

void BM_Svd(benchmark::State& state) {
  const Matrix f = gaussian(state.range(0), state.range(1), 1);
  for (auto _ : state) benchmark::DoNotOptimize(nmtune::svd(f));
}
BENCHMARK(BM_Svd)->Args({16, 12})->Args({64, 32})->Args({256, 32})->Args({1000, 64});

void BM_Analyze(benchmark::State& state) {
  const Matrix f = gaussian(state.range(0), 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(nmtune::analyze(f, "bench", "bench"));
}
BENCHMARK(BM_Analyze)->Arg(256)->Arg(2000);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = gaussian(n, n, 3), b = gaussian(n, n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(nmtune::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

// One NMTune objective evaluation at the desk-scale batch size.
void BM_NmTuneTotal(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const Matrix f = gaussian(batch, 32, 5), z = gaussian(batch, 32, 6), g = gaussian(batch, 32, 7);
  const nmtune::NmTuneConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(nmtune::nmtune_total(1.0, g, f, z, cfg));
}
BENCHMARK(BM_NmTuneTotal)->Arg(64)->Arg(256);

void BM_FlipSymmetric(benchmark::State& state) {
  std::vector<nmtune::Label> labels(state.range(0));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<nmtune::Label>(i % 100);
  for (auto _ : state) benchmark::DoNotOptimize(nmtune::flip_symmetric(labels, 100, 0.3, 9));
}
BENCHMARK(BM_FlipSymmetric)->Arg(50000);

void BM_FmatRoundTrip(benchmark::State& state) {
  const Matrix m = gaussian(state.range(0), 32, 8);
  for (auto _ : state) benchmark::DoNotOptimize(nmtune::io::decode_fmat(nmtune::io::encode_fmat(m)));
  state.SetBytesProcessed(state.iterations() * m.size() * sizeof(double));
}
BENCHMARK(BM_FmatRoundTrip)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
