#include <benchmark/benchmark.h>

#include <cmath>

#include "cbadc/analyze.hpp"
#include "cbadc/design.hpp"
#include "cbadc/estimate.hpp"
#include "cbadc/sim.hpp"
#include "cbadc/xfer.hpp"

using namespace cbadc;

namespace {

constexpr double kT = 1.0 / 21.5;

AnalogSystem chain(int n) { return build_chain(uniform_chain(n, 10.0, 1.05), Readout::all_states); }

double eta2(int n) { return std::pow(eta_from_osr(10.0 * kT, 32.0, n), 2); }

Mat controls(int n, long long periods) {
  SimConfig c;
  c.spec = uniform_chain(n, 10.0, 1.05);
  c.T = kT;
  c.input = InputSignal::sine(0.5, 0.1);
  c.periods = periods;
  c.options.substeps = 1;
  return simulate(c).trace.to_matrix();
}

void BM_CareSolve(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const AnalogSystem sys = chain(n);
  const Mat C = sys.CT.transpose();
  for (auto _ : st) benchmark::DoNotOptimize(care_solve(sys.A, sys.B, C, eta2(n), Direction::forward).V);
}
BENCHMARK(BM_CareSolve)->DenseRange(2, 8, 2)->Unit(benchmark::kMillisecond);

void BM_DesignFilter(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const AnalogSystem sys = chain(n);
  for (auto _ : st) benchmark::DoNotOptimize(design_filter(sys, eta2(n), kT).W);
}
BENCHMARK(BM_DesignFilter)->DenseRange(2, 8, 2)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  SimConfig c;
  c.spec = uniform_chain(n, 10.0, 1.05);
  c.T = kT;
  c.input = InputSignal::sine(0.5, 0.1);
  c.periods = 1 << 16;
  c.options.substeps = static_cast<int>(st.range(1));
  for (auto _ : st) benchmark::DoNotOptimize(simulate(c).trace.codes.data());
  st.SetItemsProcessed(st.iterations() * c.periods);
}
BENCHMARK(BM_Simulate)->Args({3, 1})->Args({5, 1})->Args({5, 16})->Unit(benchmark::kMillisecond);

void BM_EstimateBatch(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const FilterCoefficients co = design_filter(chain(n), eta2(n), kT);
  const Mat S = controls(n, 1 << 16);
  for (auto _ : st) benchmark::DoNotOptimize(estimate_batch(co, S, kT).samples.data());
  st.SetItemsProcessed(st.iterations() * S.cols());
}
BENCHMARK(BM_EstimateBatch)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_EstimateMixed(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const FilterCoefficients co = design_filter(chain(n), eta2(n), kT);
  const Mat S = controls(n, 1 << 16);
  const int L = settle_length(co);
  for (auto _ : st) benchmark::DoNotOptimize(estimate_mixed(co, S, L).samples.data());
  st.SetItemsProcessed(st.iterations() * S.cols());
}
BENCHMARK(BM_EstimateMixed)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_EstimateParallel(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const bool lut = st.range(1) != 0;
  const ParallelForm pf = parallelize(design_filter(chain(n), eta2(n), kT));
  const Mat S = controls(n, 1 << 16);
  for (auto _ : st) benchmark::DoNotOptimize(estimate_parallel(pf, S, kT, kT, lut).samples.data());
  st.SetItemsProcessed(st.iterations() * S.cols());
}
BENCHMARK(BM_EstimateParallel)->Args({5, 0})->Args({5, 1})->Unit(benchmark::kMillisecond);

void BM_Psd(benchmark::State& st) {
  Vec x(1 << 20);
  for (long long i = 0; i < x.size(); ++i) x(i) = std::sin(0.01 * i) + 1e-3 * std::cos(1.7 * i * i);
  WelchOptions o;
  o.segment = static_cast<long long>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(psd(x, 21.5, o).psd.data());
}
BENCHMARK(BM_Psd)->Arg(1 << 12)->Arg(1 << 16)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
