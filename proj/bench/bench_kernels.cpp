// Serial reference against the OpenMP kernels on the OU preset sizes.

#include <algorithm>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "hkb/kernel.hpp"
#include "hkb/kernels.hpp"
#include "hkb/montecarlo.hpp"
#include "hkb/spi.hpp"

namespace {

const hkb::KernelSpectrum& spectrum() {
  static const hkb::KernelSpectrum s(hkb::build_generator(hkb::Potential(hkb::Quadratic{1.0}), 400, 6.0));
  return s;
}

const std::vector<double>& sorted_samples() {
  static const std::vector<double> v = [] {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.6, 0.8);
    std::vector<double> s(100000);
    for (auto& x : s) x = n(rng);
    std::sort(s.begin(), s.end());
    return s;
  }();
  return v;
}

template <bool Parallel>
void heat_kernel_table(benchmark::State& state) {
  const auto view = spectrum().view();
  hkb::kernels::SymmetricTable out;
  out.resize(view.n);
  for (auto _ : state) {
    if constexpr (Parallel)
      hkb::kernels::omp::heat_kernel_table(view, 0.1, 0, out);
    else
      hkb::kernels::serial::heat_kernel_table(view, 0.1, 0, out);
    benchmark::DoNotOptimize(out.data.data());
  }
}

template <bool Parallel>
void kde(benchmark::State& state) {
  const auto& x = spectrum().grid().x;
  std::vector<double> out(x.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      hkb::kernels::omp::kde(sorted_samples(), 0.07, x, out);
    else
      hkb::kernels::serial::kde(sorted_samples(), 0.07, x, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void euler_maruyama(benchmark::State& state) {
  hkb::kernels::EulerMaruyamaSetup setup;
  setup.drift = [](double x) { return -x; };
  setup.x0 = 1.0;
  setup.dt = 1e-3;
  setup.steps = 500;
  setup.reflect_at = 60.0;
  setup.seed = 1;
  const auto paths = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto r = Parallel ? hkb::kernels::omp::euler_maruyama(setup, paths) : hkb::kernels::serial::euler_maruyama(setup, paths);
    benchmark::DoNotOptimize(r.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 500);
}

template <bool Parallel>
void best_b_curve(benchmark::State& state) {
  const hkb::Potential pot(hkb::PowerExponential{3.0});
  const auto gen = hkb::build_generator(pot, 400, 2.8);
  const auto forms = hkb::make_spi_forms(gen, hkb::Weight(gen.potential, 0.0));
  const auto s = hkb::logspace(1e-3, 1e-1, 7);
  for (auto _ : state) {
    auto c = hkb::empirical_best_b_curve(s, forms, {}, Parallel ? hkb::Exec::parallel : hkb::Exec::serial);
    benchmark::DoNotOptimize(c.b.data());
  }
}

}  // namespace

BENCHMARK(heat_kernel_table<false>)->Name("heat_kernel_table/serial")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(heat_kernel_table<true>)->Name("heat_kernel_table/omp")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(kde<false>)->Name("kde/serial")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(kde<true>)->Name("kde/omp")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(euler_maruyama<false>)->Name("euler_maruyama/serial")->Arg(20000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(euler_maruyama<true>)->Name("euler_maruyama/omp")->Arg(20000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(best_b_curve<false>)->Name("best_b_curve/serial")->Unit(benchmark::kMillisecond)->UseRealTime()->Iterations(2);
BENCHMARK(best_b_curve<true>)->Name("best_b_curve/omp")->Unit(benchmark::kMillisecond)->UseRealTime()->Iterations(2);

BENCHMARK_MAIN();
