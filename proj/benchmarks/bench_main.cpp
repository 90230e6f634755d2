#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "layertime/lens.hpp"
#include "layertime/metrics.hpp"
#include "layertime/model.hpp"
#include "layertime/stats.hpp"

using namespace layertime;

namespace {

std::vector<TokenId> tokens(std::size_t n, std::size_t vocab) {
  std::mt19937_64 rng(1);
  std::vector<TokenId> t(n);
  for (auto& x : t) x = static_cast<TokenId>(rng() % vocab);
  return t;
}

ModelConfig config(std::size_t layers, std::size_t vocab) {
  ModelConfig c;
  c.n_layers = layers;
  c.d_model = 64;
  c.n_heads = 4;
  c.vocab_size = vocab;
  c.max_seq_len = 128;
  return c;
}

}  // namespace

static void BM_ForwardAndLens(benchmark::State& state) {
  const auto c = config(static_cast<std::size_t>(state.range(0)), 4096);
  const auto w = init_reference_weights(c, 7);
  const auto t = tokens(32, c.vocab_size);
  for (auto _ : state) {
    auto lens = logit_lens(forward_with_trace(w, t), w);
    benchmark::DoNotOptimize(lens.state_logits.data());
  }
}
BENCHMARK(BM_ForwardAndLens)->Arg(4)->Arg(12)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_ItemMetrics(benchmark::State& state) {
  const auto c = config(12, static_cast<std::size_t>(state.range(0)));
  const auto w = init_reference_weights(c, 7);
  const auto lens = logit_lens(forward_with_trace(w, tokens(16, c.vocab_size)), w);
  for (auto _ : state) {
    auto m = item_metrics("x", curves_from_logits(lens, 3, 5), c.vocab_size);
    benchmark::DoNotOptimize(m.values);
  }
}
BENCHMARK(BM_ItemMetrics)->Arg(1024)->Arg(32000)->Unit(benchmark::kMicrosecond);

static void BM_FitGaussian(benchmark::State& state) {
  const auto n_groups = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  DesignTable design;
  std::vector<double> y;
  std::vector<std::string> groups;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const double u = n(rng);
    for (int r = 0; r < 40; ++r) {
      const double a = n(rng), b = n(rng);
      design["a"].push_back(a);
      design["b"].push_back(b);
      y.push_back(0.5 * a - 0.2 * b + u + n(rng));
      groups.push_back(std::to_string(g));
    }
  }
  RegressionSpec spec;
  spec.dv_name = "y";
  spec.fixed_terms = {"a", "b", "a:b"};
  for (auto _ : state) benchmark::DoNotOptimize(fit_model(spec, design, y, groups).log_likelihood);
}
BENCHMARK(BM_FitGaussian)->Arg(30)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_FitBinomial(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  DesignTable design;
  std::vector<double> y;
  std::vector<std::string> groups;
  for (int g = 0; g < 30; ++g) {
    const double u = 0.5 * n(rng);
    for (int r = 0; r < 40; ++r) {
      const double a = n(rng);
      design["a"].push_back(a);
      y.push_back(std::bernoulli_distribution(1.0 / (1.0 + std::exp(-(0.4 * a + u))))(rng) ? 1.0 : 0.0);
      groups.push_back(std::to_string(g));
    }
  }
  RegressionSpec spec;
  spec.dv_name = "y";
  spec.family = Family::Binomial;
  spec.fixed_terms = {"a"};
  for (auto _ : state) benchmark::DoNotOptimize(fit_model(spec, design, y, groups).log_likelihood);
}
BENCHMARK(BM_FitBinomial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
