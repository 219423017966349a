// Serial reference kernels against their OpenMP counterparts.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include "fifuse/explainers.hpp"
#include "fifuse/models.hpp"
#include "fifuse/reference.hpp"
#include "fifuse/synthdata.hpp"

using namespace fifuse;

namespace {

struct Setup {
    Dataset data = generate_dataset({400, 8, 50.0, 1.0, 1});
    RandomForest forest;
    Mlp net = Mlp::random(8, {64, 64, 32, 16, 8, 6, 4, 1}, 2);
    BackgroundSet bg;
    Matrix explain;

    Setup() {
        ForestParams p;
        p.n_trees = 100;
        forest = RandomForest::train(data.X, data.y, p, 3);
        bg = kmeans_summarize(data.X, 25, 4);
        explain = data.X.slice_rows(0, 10);
    }
};

const Setup& setup() {
    static const Setup s;
    return s;
}

void BM_PredictReference(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) benchmark::DoNotOptimize(reference::predict(s.forest, s.data.X));
}

void BM_PredictParallel(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) benchmark::DoNotOptimize(s.forest.predict(s.data.X));
}

void BM_PermutationImportanceReference(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) benchmark::DoNotOptimize(reference::permutation_importance(s.forest, s.data.X, s.data.y, 5, 7));
}

void BM_PermutationImportanceParallel(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) benchmark::DoNotOptimize(permutation_importance(s.forest, s.data.X, s.data.y, 5, 7));
}

void BM_ExactShapleyReference(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) benchmark::DoNotOptimize(reference::exact_shapley_values(s.net, s.explain, s.bg));
}

void BM_ExactShapleyParallel(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) benchmark::DoNotOptimize(exact_shapley_values(s.net, s.explain, s.bg));
}

void BM_GlobalIgReference(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) benchmark::DoNotOptimize(reference::global_ig(s.net, s.explain, Baseline::zeros(8), 100));
}

void BM_GlobalIgParallel(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) benchmark::DoNotOptimize(global_ig(s.net, s.explain, Baseline::zeros(8), 100));
}

}  // namespace

BENCHMARK(BM_PredictReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PermutationImportanceReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PermutationImportanceParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExactShapleyReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExactShapleyParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GlobalIgReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GlobalIgParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
