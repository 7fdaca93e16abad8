#include <benchmark/benchmark.h>

#include <random>

#include "lpp/spectral.hpp"

namespace {

Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index d) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = z(rng);
  }
  return m;
}

// n tokens x d hidden units; the reference shapes are 200 x {768, 2048, 4096}
void BM_CovarianceSpectrum(benchmark::State& state) {
  const Eigen::MatrixXd x = gaussian(state.range(0), state.range(1));
  for (auto _ : state) {
    const lpp::EigSpectrum s = lpp::covariance_spectrum(x);
    benchmark::DoNotOptimize(lpp::effective_rank(s) + lpp::participation_ratio(s));
  }
}
BENCHMARK(BM_CovarianceSpectrum)
    ->Args({200, 64})
    ->Args({200, 768})
    ->Args({200, 2048})
    ->Args({200, 4096})
    ->Unit(benchmark::kMillisecond);

void BM_EntropySeries(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const auto v = static_cast<std::size_t>(state.range(1));
  std::mt19937 rng(3);
  std::normal_distribution<float> z(0.f, 4.f);
  std::vector<float> logits(t * v);
  for (auto& x : logits) x = z(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lpp::entropy_series(logits, v));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * t));
}
BENCHMARK(BM_EntropySeries)->Args({200, 1000})->Args({200, 50257})->Unit(benchmark::kMillisecond);

}  // namespace
