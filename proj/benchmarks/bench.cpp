#include <benchmark/benchmark.h>

#include <vector>

#include "reprdyn/datasets.hpp"
#include "reprdyn/fitter.hpp"
#include "reprdyn/network.hpp"
#include "reprdyn/theory.hpp"

using namespace reprdyn;

namespace {

EffectiveParams params() {
  EffectiveParams p;
  p.dx2 = 0.25;
  p.dyT2 = 1.0;
  p.inv_tau_h = 0.3;
  p.inv_tau_y = 0.05;
  return p;
}

std::vector<double> grid(double t_end, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = t_end * i / (n - 1);
  t.back() = t_end;
  return t;
}

void BM_Rhs(benchmark::State& state) {
  const auto p = params();
  TheoryState s{0.3, 0.2, -0.1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(s);
    benchmark::DoNotOptimize(rhs(s, p));
  }
}
BENCHMARK(BM_Rhs);

void BM_Integrate(benchmark::State& state) {
  const auto p = params();
  const auto times = grid(3000.0, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto r = integrate({1e-3, 1e-6, 0.0}, p, RhsVariant::True, 3000.0, times, 1e-8);
    benchmark::DoNotOptimize(r.trajectory.states.data());
  }
}
BENCHMARK(BM_Integrate)->Arg(61)->Arg(601)->Arg(6001);

void BM_TrainStep(benchmark::State& state) {
  NetworkConfig c;
  c.input_dim = 2;
  c.output_dim = 1;
  c.hidden_layers = 8;
  c.units = static_cast<int>(state.range(0));
  c.seed = 1;
  Network net(c);
  const Dataset data = xor_dataset();
  TrainSchedule s;
  s.learning_rate = 1e-3;
  TrainState st = TrainState::for_network(net);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(net, data.inputs, data.targets, s, st));
}
BENCHMARK(BM_TrainStep)->Arg(100)->Arg(500);

void BM_Fit(benchmark::State& state) {
  const auto p = params();
  const auto observed =
      integrate({1e-3, 1e-6, 0.0}, p, RhsVariant::True, 3000.0, grid(3000.0, 601), 1e-10).value();
  EffectiveParams partial;
  partial.dx2 = p.dx2;
  partial.dyT2 = p.dyT2;
  FitOptions o;
  o.starts = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto f = fit_rates(observed, partial, RhsVariant::True, false, o);
    benchmark::DoNotOptimize(f.fit_loss);
  }
}
BENCHMARK(BM_Fit)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
