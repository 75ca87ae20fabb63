#include <benchmark/benchmark.h>

#include <random>

#include "pvtrade/execution.hpp"
#include "pvtrade/mdp_env.hpp"
#include "pvtrade/policy.hpp"
#include "pvtrade/training.hpp"

namespace {

using namespace pvtrade;

const Dataset& bench_data() {
  static const Dataset d = generate_synthetic_dataset(GeneratorConfig{}, 17);
  return d;
}

void BM_ExecutePeriod(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PeriodInputs> cases(256);
  for (auto& in : cases) {
    const double mid = 20 + 80 * u(rng);
    in.p_bid = mid - 2 * u(rng);
    in.p_ask = mid + 2 * u(rng);
    in.p_im = mid + 40 * (u(rng) - 0.5);
    in.g_da = 8 * u(rng);
    in.g_hat = in.g_da + 4 * (u(rng) - 0.5);
    in.g_act = in.g_hat;
    in.depth_ask_cap = in.depth_buy_cap = 10 * u(rng);
    in.a_rec = 4 * (u(rng) - 0.5);
  }
  const ExecParams p;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(execute_period(cases[i++ & 255], p));
  }
}
BENCHMARK(BM_ExecutePeriod);

void BM_MeanAction(benchmark::State& state) {
  auto p = PolicyParams::zeros(2);
  for (std::size_t i = 0; i < p.W.size(); ++i) p.W[i] = 0.01 * static_cast<double>(i % 7);
  FeatureVector x;
  for (std::size_t i = 0; i < kFeatureDim; ++i) x[i] = 0.1 * static_cast<double>(i);
  const ActionBox box;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mean_action(p, x, box));
  }
}
BENCHMARK(BM_MeanAction);

// One decision round: observe, act with the mean policy, step the environment.
void BM_DecisionStep(benchmark::State& state) {
  const auto& d = bench_data();
  const auto in = prepare_inputs(d, {}, 8760);
  const EnvConfig cfg;
  Environment env(in.data, in.features, cfg);
  const auto starts = env.episode_starts();
  auto p = PolicyParams::zeros(2);
  p.weight(0, kForecastImbalance) = 0.5;
  const auto box = action_box(cfg);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  std::size_t day = 0;
  env.reset(starts[day]);
  for (auto _ : state) {
    if (env.done()) {
      state.PauseTiming();
      day = (day + 1) % starts.size();
      env.reset(starts[day]);
      state.ResumeTiming();
    }
    const auto a = mean_action(p, env.observation(), box);
    benchmark::DoNotOptimize(env.step(a, {u(rng), n(rng), 0.0}));
  }
}
BENCHMARK(BM_DecisionStep);

}  // namespace

BENCHMARK_MAIN();
