#include <benchmark/benchmark.h>

#include <random>

#include "normprobe/correlation_stats.hpp"
#include "normprobe/moral_direction.hpp"

using namespace normprobe;

namespace {

std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

}  // namespace

static void BM_FitDirection(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto d = static_cast<std::size_t>(state.range(0));
  std::vector<Anchor> anchors;
  for (int i = 0; i < 40; ++i) {
    anchors.push_back({gaussian(d, rng), i % 2 ? Polarity::negative : Polarity::positive});
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_direction(anchors));
}
BENCHMARK(BM_FitDirection)->Arg(32)->Arg(768)->Unit(benchmark::kMillisecond);

static void BM_Pearson(benchmark::State& state) {
  std::mt19937_64 rng(2);
  auto n = static_cast<std::size_t>(state.range(0));
  auto x = gaussian(n, rng), y = gaussian(n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(pearson(x, y));
}
BENCHMARK(BM_Pearson)->Arg(100)->Arg(10000);

static void BM_Spearman(benchmark::State& state) {
  std::mt19937_64 rng(3);
  auto n = static_cast<std::size_t>(state.range(0));
  auto x = gaussian(n, rng), y = gaussian(n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(spearman(x, y));
}
BENCHMARK(BM_Spearman)->Arg(100)->Arg(10000);

static void BM_Bootstrap(benchmark::State& state) {
  std::mt19937_64 rng(4);
  auto x = gaussian(200, rng), y = gaussian(200, rng);
  BootstrapConfig cfg{1000, 7, 0.05, static_cast<unsigned>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_ci(x, y, Method::pearson, cfg));
}
BENCHMARK(BM_Bootstrap)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

static void BM_CrossLanguageMatrix(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::vector<LanguageScores> tables;
  for (const char* l : {"en", "ar", "cs", "de", "zh"}) {
    LanguageScores ls{l, {}, gaussian(500, rng)};
    for (int i = 0; i < 500; ++i) ls.ids.push_back("s" + std::to_string(i));
    tables.push_back(std::move(ls));
  }
  for (auto _ : state) benchmark::DoNotOptimize(cross_language_matrix(tables, Method::spearman));
}
BENCHMARK(BM_CrossLanguageMatrix)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
