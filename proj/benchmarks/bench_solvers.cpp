#include <benchmark/benchmark.h>

#include <random>

#include "apgp/altproj.hpp"
#include "apgp/cg.hpp"
#include "apgp/gp.hpp"

namespace {

using namespace apgp;

PointMatrix<double> points(Index n, Index d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  PointMatrix<double> X(n, d);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = z(rng);
  return X;
}

Eigen::MatrixXd rhs(Index n, Index l) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  Eigen::MatrixXd B(n, l);
  for (Index i = 0; i < B.size(); ++i) B.data()[i] = z(rng);
  return B;
}

const KernelSpec kSpec = KernelSpec::isotropic(KernelFamily::Matern52, 5, 1.0, 1.0, 0.01);

void BM_KernelBlock(benchmark::State& state) {
  const Index n = state.range(0), b = state.range(1);
  const auto X = points(n, 5);
  const IndexList all = iota_indices(0, n), cols = iota_indices(0, b);
  for (auto _ : state) benchmark::DoNotOptimize(kernel_block<double>(kSpec, X, all, cols));
  state.SetItemsProcessed(state.iterations() * n * b);
}
BENCHMARK(BM_KernelBlock)->Args({2000, 100})->Args({2000, 1000})->Unit(benchmark::kMillisecond);

void BM_ApEpoch(benchmark::State& state) {
  const Index n = state.range(0), b = state.range(1);
  const KernelOperator<double> op(kSpec, points(n, 5),
                                  state.range(2) ? Storage::Dense : Storage::Lazy);
  const CholeskyCache<double> cache(op, make_partition(n, b));
  const Eigen::MatrixXd B = rhs(n, 16);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        ap_solve(op, B, cache, SelectionRule::gauss_southwell(), StoppingCriteria{1e-30, 1, 0}));
  state.counters["flops/epoch"] = flops_formula(n, b, 16);
}
BENCHMARK(BM_ApEpoch)
    ->ArgNames({"n", "b", "dense"})
    ->Args({2000, 100, 0})
    ->Args({2000, 100, 1})
    ->Args({2000, 1000, 0})
    ->Args({2000, 1000, 1})
    ->Unit(benchmark::kMillisecond);

void BM_CgIteration(benchmark::State& state) {
  const Index n = state.range(0);
  const KernelOperator<double> op(kSpec, points(n, 5),
                                  state.range(1) ? Storage::Dense : Storage::Lazy);
  const Eigen::MatrixXd B = rhs(n, 16);
  for (auto _ : state)
    benchmark::DoNotOptimize(cg_solve(op, B, StoppingCriteria{1e-30, 1, 0}));
}
BENCHMARK(BM_CgIteration)->ArgNames({"n", "dense"})->Args({2000, 0})->Args({2000, 1})
    ->Unit(benchmark::kMillisecond);

void BM_PivotedCholesky(benchmark::State& state) {
  const KernelOperator<double> op(kSpec, points(2000, 5));
  for (auto _ : state) benchmark::DoNotOptimize(make_kernel_preconditioner(op, state.range(0)));
}
BENCHMARK(BM_PivotedCholesky)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_GradientEstimate(benchmark::State& state) {
  const Index n = 1000;
  const auto X = points(n, 5);
  const TraceProbeSet probes = make_probes(rhs(n, 1).col(0), 0.0, 15, ProbeKind::Rademacher, 3);
  SolverConfig cfg;
  cfg.batch_size = 500;
  cfg.wall_clock = false;
  for (auto _ : state) benchmark::DoNotOptimize(mll_gradient_estimate(kSpec, X, probes, cfg));
}
BENCHMARK(BM_GradientEstimate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
