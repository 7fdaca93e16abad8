#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "lpp/stats.hpp"

namespace {

std::vector<double> draws(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> out(n);
  for (auto& x : out) x = z(rng);
  return out;
}

// n <= 9 enumerates all n! pairings; above that the t approximation is used.
void BM_SpearmanPermutation(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = draws(n, 1);
  const auto y = draws(n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lpp::spearman(x, y));
  }
}
BENCHMARK(BM_SpearmanPermutation)->DenseRange(5, 10)->Unit(benchmark::kMicrosecond);

}  // namespace
