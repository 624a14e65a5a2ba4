// Parallel kernels against the serial reference at model-sized shapes.
// Run with OMP_NUM_THREADS set to compare thread counts.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dtsl/kernels.hpp"

namespace k = dtsl::kernels;

namespace {

std::vector<double> noise(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

std::vector<double> probs(std::size_t b, std::size_t c, std::size_t n, unsigned seed) {
    const auto logits = noise(b * c * n, seed);
    std::vector<double> out(logits.size());
    k::reference::softmax(b, c, n, logits, out);
    return out;
}

// args: channels in/out and spatial size; 3x3, stride 1, pad 1, batch 4
k::ConvGeometry conv_geometry(const benchmark::State& s) {
    k::ConvGeometry g;
    g.batch = 4;
    g.in_channels = g.out_channels = std::size_t(s.range(0));
    g.height = g.width = std::size_t(s.range(1));
    g.kernel_h = g.kernel_w = 3;
    g.padding = 1;
    return g;
}

template <auto Fn>
void conv_forward(benchmark::State& s) {
    const auto g = conv_geometry(s);
    const auto in = noise(g.batch * g.in_channels * g.height * g.width, 1);
    const auto w = noise(g.out_channels * g.in_channels * 9, 2);
    std::vector<double> out(g.batch * g.out_channels * g.out_h() * g.out_w());
    for (auto _ : s) {
        Fn(g, in, w, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Fn>
void conv_backward_input(benchmark::State& s) {
    const auto g = conv_geometry(s);
    const auto go = noise(g.batch * g.out_channels * g.out_h() * g.out_w(), 3);
    const auto w = noise(g.out_channels * g.in_channels * 9, 2);
    std::vector<double> gi(g.batch * g.in_channels * g.height * g.width);
    for (auto _ : s) {
        Fn(g, go, w, gi);
        benchmark::DoNotOptimize(gi.data());
    }
}

template <auto Fn>
void conv_backward_kernel(benchmark::State& s) {
    const auto g = conv_geometry(s);
    const auto go = noise(g.batch * g.out_channels * g.out_h() * g.out_w(), 3);
    const auto in = noise(g.batch * g.in_channels * g.height * g.width, 1);
    std::vector<double> gw(g.out_channels * g.in_channels * 9);
    for (auto _ : s) {
        Fn(g, go, in, gw);
        benchmark::DoNotOptimize(gw.data());
    }
}

template <auto Fn>
void js(benchmark::State& s) {
    const k::ClassMapGeometry g{4, 4, std::size_t(s.range(0) * s.range(0))};
    const auto p = probs(g.batch, g.classes, g.pixels, 4), q = probs(g.batch, g.classes, g.pixels, 5);
    std::vector<double> out(g.batch * g.pixels);
    for (auto _ : s) {
        Fn(g, p, q, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Fn>
void consensus(benchmark::State& s) {
    const k::ClassMapGeometry g{4, 4, std::size_t(s.range(0) * s.range(0))};
    const auto p = probs(g.batch, g.classes, g.pixels, 4), q = probs(g.batch, g.classes, g.pixels, 5);
    std::vector<std::int32_t> out(g.batch * g.pixels);
    for (auto _ : s) {
        Fn(g, p, q, 0.05, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Fn>
void softmax(benchmark::State& s) {
    const std::size_t n = std::size_t(s.range(0) * s.range(0));
    const auto in = noise(4 * 4 * n, 6);
    std::vector<double> out(in.size());
    for (auto _ : s) {
        Fn(4, 4, n, in, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void conv_args(benchmark::internal::Benchmark* b) {
    b->Args({4, 64})->Args({8, 32})->Args({16, 16})->Args({8, 64})->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(conv_forward<k::conv2d_forward>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(conv_forward<k::reference::conv2d_forward>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(conv_backward_input<k::conv2d_backward_input>)->Name("conv_backward_input/parallel")->Apply(conv_args);
BENCHMARK(conv_backward_input<k::reference::conv2d_backward_input>)->Name("conv_backward_input/reference")->Apply(conv_args);
BENCHMARK(conv_backward_kernel<k::conv2d_backward_kernel>)->Name("conv_backward_kernel/parallel")->Apply(conv_args);
BENCHMARK(conv_backward_kernel<k::reference::conv2d_backward_kernel>)->Name("conv_backward_kernel/reference")->Apply(conv_args);
BENCHMARK(js<k::js_field>)->Name("js_field/parallel")->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(js<k::reference::js_field>)->Name("js_field/reference")->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(consensus<k::consensus_labels>)->Name("consensus_labels/parallel")->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(consensus<k::reference::consensus_labels>)->Name("consensus_labels/reference")->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(softmax<k::softmax>)->Name("softmax/parallel")->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(softmax<k::reference::softmax>)->Name("softmax/reference")->Arg(64)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
