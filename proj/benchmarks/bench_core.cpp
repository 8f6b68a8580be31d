#include <benchmark/benchmark.h>

#include "obsrobust/model_io.hpp"
#include "obsrobust/param_lifting.hpp"
#include "obsrobust/robust_eval.hpp"
#include "obsrobust/validation.hpp"

using namespace obsrobust;

namespace {

void BM_RobustBackupRow(benchmark::State& state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    numvec lo(k, 0.5 / static_cast<double>(k));
    numvec hi(k, 1.5 / static_cast<double>(k));
    numvec values(k);
    for (std::size_t i = 0; i < k; ++i) values[i] = static_cast<double>((i * 7919) % 101);
    for (auto _ : state) {
        auto [row, v] = robust_backup_min(lo, hi, values);
        benchmark::DoNotOptimize(v);
    }
}
BENCHMARK(BM_RobustBackupRow)->Arg(4)->Arg(16)->Arg(64);

void BM_IpeToyRover(benchmark::State& state) {
    auto [m, pi] = builtin(BenchmarkId::toy_rover);
    m.discount = 1.0;
    TwoStepIntervalMc chain = repair_unreachable(build_tsimc(build_tsmc(m, pi), 0.1, 0.01));
    for (auto _ : state) {
        IpeResult r = ipe_min(chain, Horizon::finite(10));
        benchmark::DoNotOptimize(r.value_at_initial());
    }
}
BENCHMARK(BM_IpeToyRover);

void BM_IpeRoverNavInfinite(benchmark::State& state) {
    auto [m, pi] = builtin(BenchmarkId::rover_nav);
    TwoStepIntervalMc chain = repair_unreachable(build_tsimc(build_tsmc(m, pi), 0.1, 0.0));
    for (auto _ : state) {
        IpeResult r = ipe_min(chain, Horizon::finite(100));
        benchmark::DoNotOptimize(r.value_at_initial());
    }
}
BENCHMARK(BM_IpeRoverNavInfinite);

void BM_PlaToyRover(benchmark::State& state) {
    auto [m, pi] = builtin(BenchmarkId::toy_rover);
    m.discount = 1.0;
    ParametricMc pmc = build_pmc(m, pi);
    Region region = region_for(m, 0.1, 0.01);
    for (auto _ : state) {
        PlaResult r = pla_min(pmc, region, Horizon::finite(5), 1e-5);
        benchmark::DoNotOptimize(r.min_value);
    }
}
BENCHMARK(BM_PlaToyRover);

void BM_CancerInfiniteValue(benchmark::State& state) {
    auto [m, pi] = builtin(BenchmarkId::cancer);
    for (auto _ : state) {
        FscEvaluation v = fsc_value(m, pi, Horizon::infinite(), 1e-7);
        benchmark::DoNotOptimize(v.initial_value);
    }
}
BENCHMARK(BM_CancerInfiniteValue);

}  // namespace

BENCHMARK_MAIN();
