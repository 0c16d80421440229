#include "corrdef/consistency.hpp"
#include "corrdef/ctmc.hpp"
#include "corrdef/default_model.hpp"
#include "corrdef/reduced_models.hpp"

#include <benchmark/benchmark.h>

#include <bit>
#include <random>

using namespace corrdef;

namespace {

ModelParams dense_params(int n) {
    const Graph g = Graph::complete(n);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> alpha(static_cast<std::size_t>(n));
    std::vector<double> beta(g.edges().size());
    for (double& a : alpha) a = u(rng);
    for (double& b : beta) b = 0.5 * u(rng);
    return ModelParams(g, alpha, beta);
}

MonotoneGenerator generic_generator(int n) {
    return MonotoneGenerator::from_function(
        n, [](Subset a, int v) { return 0.5 + 0.1 * v + 0.2 * std::popcount(a) + 0.05 * (a % 7); });
}

void BM_LogPartition(benchmark::State& state) {
    const ModelParams p = dense_params(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(log_partition(p));
}
BENCHMARK(BM_LogPartition)->DenseRange(4, 16, 4);

void BM_ExtractInteractions(benchmark::State& state) {
    const SubsetDist d = full_distribution(dense_params(static_cast<int>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(extract_interactions(d));
}
BENCHMARK(BM_ExtractInteractions)->DenseRange(4, 14, 2);

void BM_ForwardSolve(benchmark::State& state) {
    const MonotoneGenerator g = generic_generator(static_cast<int>(state.range(0)));
    const auto grid = residual_grid(1.0);
    for (auto _ : state) benchmark::DoNotOptimize(forward_solve(g, grid));
}
BENCHMARK(BM_ForwardSolve)->DenseRange(2, 10, 2)->Unit(benchmark::kMillisecond);

void BM_CurvesFromRates(benchmark::State& state) {
    const MonotoneGenerator g = generic_generator(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(curves_from_rates(g));
}
BENCHMARK(BM_CurvesFromRates)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_EvaluateRatesII(benchmark::State& state) {
    const ModelSpec model{ReducedModel::II, 3, 3};
    const SearchTargets targets{0.0, 0.0, 0.0, 0.25};
    const auto rates = independent_lumped_rates(model, targets, 1.0);
    const SearchConfig config;
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_rates(model, targets, rates, config));
}
BENCHMARK(BM_EvaluateRatesII)->Unit(benchmark::kMicrosecond);

void BM_EvaluateRatesIII(benchmark::State& state) {
    const ModelSpec model{ReducedModel::III, 4, 3};
    const SearchTargets targets{0.0, 0.5, -0.5, 0.1};
    const auto rates = independent_lumped_rates(model, targets, 1.0);
    const SearchConfig config;
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_rates(model, targets, rates, config));
}
BENCHMARK(BM_EvaluateRatesIII)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
