#include <benchmark/benchmark.h>

#include "senslab/architectures.hpp"
#include "senslab/attribution.hpp"
#include "senslab/local_sensitivity.hpp"
#include "senslab/model_analysis.hpp"
#include "senslab/network.hpp"
#include "senslab/rng.hpp"
#include "senslab/sobol_analysis.hpp"
#include "senslab/sobol_sequence.hpp"
#include "senslab/test_functions.hpp"

using namespace senslab;

namespace {

Tensor random_image(std::size_t size, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t({size, size, 3});
    for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_SobolSequence(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(sobol_sequence(16, n));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_SobolSequence)->Arg(1 << 10)->Arg(1 << 14);

void BM_IshigamiIndices(benchmark::State& state) {
    const TestFunction f = make_test_function("ishigami");
    SobolPlan plan = SobolPlan::unit(3, static_cast<std::size_t>(state.range(0)));
    plan.bounds = f.bounds;
    plan.bootstrap_resamples = static_cast<std::size_t>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(analyze_function(f.model, plan, 1));
}
BENCHMARK(BM_IshigamiIndices)->Args({1 << 12, 0})->Args({1 << 12, 200})->Unit(benchmark::kMillisecond);

void BM_MlpModelIndices(benchmark::State& state) {
    const Network net = make_mlp(8, 10, 1);
    SobolPlan plan = SobolPlan::unit(8, static_cast<std::size_t>(state.range(0)));
    plan.bootstrap_resamples = 0;
    for (auto _ : state) benchmark::DoNotOptimize(analyze_model_scalar(net, plan));
}
BENCHMARK(BM_MlpModelIndices)->Arg(1 << 10)->Unit(benchmark::kMillisecond);

void BM_VggForwardBackward(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    const Network net = make_vgg_tiny({size, size, 3}, 4, 1);
    const Tensor x = as_batch(random_image(size, 2));
    for (auto _ : state) {
        const ActivationTrace trace = forward(net, x);
        Tensor seed(trace.output().shape(), 1.0);
        benchmark::DoNotOptimize(backward(net, trace, seed));
    }
}
BENCHMARK(BM_VggForwardBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_PixelSensitivity(benchmark::State& state) {
    const Network net = make_vgg_tiny({16, 16, 3}, 4, 1);
    const Tensor x = random_image(16, 3);
    const int block = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(pixel_sensitivity(net, x, block, 0, 0.1));
}
BENCHMARK(BM_PixelSensitivity)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_GradCam(benchmark::State& state) {
    const Network net = make_resnet_tiny({32, 32, 3}, 4, 1);
    const Tensor x = random_image(32, 4);
    for (auto _ : state) benchmark::DoNotOptimize(grad_cam(net, x, 0));
}
BENCHMARK(BM_GradCam)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
