#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "erta/calibration.hpp"
#include "erta/pipeline.hpp"
#include "erta/rectify.hpp"
#include "erta/schedule.hpp"

using namespace erta;

namespace {

FieldSpec bench_mixture(int dim) {
    std::vector<double> m1(dim, 2.3), m2(dim, 1.7);
    return make_mixture_field(dim, {MixtureComponent{0.5, m1, 4.5},
                                    MixtureComponent{0.5, m2, 4.5}});
}

}  // namespace

static void BM_MixtureEval(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    const FieldSpec field = bench_mixture(dim);
    const StateVec x = sample_noise(1, LatentShape{1, dim, 1, 1});
    EvalCounter counter;
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval_velocity(field, x, 0.4, counter));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MixtureEval)->Arg(16)->Arg(256)->Arg(4096);

static void BM_FullSample(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    const FieldSpec field = bench_mixture(dim);
    const StateVec x0 = sample_noise(2, LatentShape{1, dim, 1, 1});
    const StepSchedule schedule = StepSchedule::uniform(50);
    for (auto _ : state) {
        benchmark::DoNotOptimize(full_sample(field, x0, schedule, SampleOptions{false}));
    }
}
BENCHMARK(BM_FullSample)->Arg(16)->Arg(256);

static void BM_CachedSample(benchmark::State& state) {
    const int dim = 256;
    const FieldSpec field = bench_mixture(dim);
    const StateVec x0 = sample_noise(3, LatentShape{1, dim, 1, 1});
    const auto policy =
        make_uniform_policy(50, uniform_cache_steps(50, static_cast<int>(state.range(0))));
    for (auto _ : state) {
        benchmark::DoNotOptimize(cached_sample(field, x0, policy, RectifyMode::off,
                                               SampleOptions{false}));
    }
}
BENCHMARK(BM_CachedSample)->Arg(0)->Arg(25)->Arg(40);

static void BM_FitKB(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> v(n), e(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = noise(rng);
        e[i] = 0.3 * v[i] + 0.05 * noise(rng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_kb(v, e));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_FitKB)->Arg(1 << 10)->Arg(1 << 16)->Arg(1 << 20);

static void BM_BuildSchedule(benchmark::State& state) {
    const int t_steps = static_cast<int>(state.range(0));
    PhiRecord phi;
    std::vector<int> steps;
    for (int i = t_steps - 2; i >= 1; i -= 2) {
        steps.push_back(i);
        phi[i] = PhiEntry{0.7, 0.0, 0.0};
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_schedule(t_steps, steps, phi));
    }
}
BENCHMARK(BM_BuildSchedule)->Arg(50)->Arg(1000);

static void BM_Calibration(benchmark::State& state) {
    const int dim = 16;
    const FieldSpec field = bench_mixture(dim);
    const LatentShape shape{1, dim, 1, 1};
    std::vector<CalibrationPrompt> prompts;
    for (int i = 1; i <= 4; ++i) {
        prompts.push_back(make_prompt(field, static_cast<std::uint64_t>(i)));
    }
    const auto profile = log_ground_truth(prompts, shape, 50);
    for (auto _ : state) {
        benchmark::DoNotOptimize(search_policy(prompts, profile, 0.1));
    }
}
BENCHMARK(BM_Calibration);

BENCHMARK_MAIN();
