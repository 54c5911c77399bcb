// Optimized kernels against the serial reference, per layer and for the
// whole network.

#include <benchmark/benchmark.h>

#include "qmireg/heatmap.hpp"
#include "qmireg/kernels.hpp"
#include "qmireg/network.hpp"
#include "qmireg/qmi.hpp"
#include "qmireg/reference.hpp"
#include "qmireg/rng.hpp"

using namespace qmireg;

namespace {

nd::Tensor random_input(nd::Shape s, std::uint64_t seed) {
    Rng rng(seed);
    nd::Tensor t(s);
    for (auto& v : t.values()) v = static_cast<float>(rng.uniform());
    return t;
}

// Second conv of the RF32 stack on a range(0)-sized square input.
const nd::ConvLayer<float>& second_conv() {
    static const auto net = model::build_model(model::Variant::RF32, 0);
    return net.layers[1].conv;
}

void BM_ConvOptimized(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto x = random_input({1, 16, n, n}, 1);
    for (auto _ : state) benchmark::DoNotOptimize(nd::conv2d_forward(x, second_conv()));
    state.SetItemsProcessed(state.iterations() * n * n);
}

void BM_ConvReference(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto x = random_input({1, 16, n, n}, 1);
    for (auto _ : state) benchmark::DoNotOptimize(nd::reference::conv2d(x, second_conv()));
    state.SetItemsProcessed(state.iterations() * n * n);
}

void BM_ForwardOptimized(benchmark::State& state) {
    const auto net = model::build_model(model::Variant::RF32, 0);
    const auto x = random_input({static_cast<std::size_t>(state.range(0)), 3, 32, 32}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(model::forward(net, x));
}

void BM_ForwardReference(benchmark::State& state) {
    const auto net = model::build_model(model::Variant::RF32, 0);
    const auto x = random_input({static_cast<std::size_t>(state.range(0)), 3, 32, 32}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(model::forward_reference(net, x));
}

void BM_FullFrame(benchmark::State& state) {
    const auto net = model::build_model(model::Variant::RF32, 0);
    const auto x = random_input({1, 3, 480, 640}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(heatmap::fully_conv_inference(net, x));
}

void BM_SlidingWindowOracle(benchmark::State& state) {
    const auto net = model::build_model(model::Variant::RF32, 0);
    const auto x = random_input({1, 3, 480, 640}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(heatmap::sliding_window_oracle(net, x));
}

void BM_JmiGradient(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    std::vector<double> y(n * 128);
    std::vector<int> c(n);
    for (auto& v : y) v = rng.normal();
    for (auto& l : c) l = static_cast<int>(rng.below(2));
    const qmi::EmbeddingBatch batch(n, 128, y, c);
    for (auto _ : state) benchmark::DoNotOptimize(qmi::j_mi_with_gradient(batch));
}

} // namespace

BENCHMARK(BM_ConvOptimized)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvReference)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardOptimized)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardReference)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FullFrame)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SlidingWindowOracle)->Unit(benchmark::kMillisecond)->Iterations(2);
BENCHMARK(BM_JmiGradient)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
