#include <benchmark/benchmark.h>

#include <random>

#include "dift/corrvol.hpp"
#include "dift/serial.hpp"
#include "dift/tensor.hpp"

namespace {

dift::Tensor random_tensor(dift::Shape s, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    dift::Tensor t(s);
    for (auto& v : t.data()) v = d(rng);
    return t;
}

dift::ConvParams random_conv(int out, int in, int k) {
    auto p = dift::ConvParams::zeros(out, in, k, 1, k / 2);
    std::mt19937 rng(11);
    std::uniform_real_distribution<float> d(-0.1f, 0.1f);
    for (auto& w : p.weights) w = d(rng);
    return p;
}

struct LookupCase {
    dift::Tensor f1, f2;
    dift::FlowField flow;
};

LookupCase lookup_case(int d) {
    LookupCase c{random_tensor({d, 28, 64}, 1), random_tensor({d, 28, 64}, 2), dift::FlowField(28, 64)};
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> f(-6.0f, 6.0f);
    for (auto& v : c.flow.data()) v = f(rng);
    return c;
}

void BM_conv2d_serial(benchmark::State& state) {
    const auto in = random_tensor({96, 28, 64}, 5);
    const auto p = random_conv(96, 96, 3);
    for (auto _ : state) benchmark::DoNotOptimize(dift::serial::conv2d(in, p));
}

void BM_conv2d_openmp(benchmark::State& state) {
    const auto in = random_tensor({96, 28, 64}, 5);
    const auto p = random_conv(96, 96, 3);
    for (auto _ : state) benchmark::DoNotOptimize(dift::conv2d(in, p));
}

void BM_jit_lookup_serial(benchmark::State& state) {
    const auto c = lookup_case(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(dift::serial::jit_lookup(c.f1, c.f2, c.flow, dift::LookupWindow{3}, 56));
    }
}

void BM_jit_lookup_openmp(benchmark::State& state) {
    const auto c = lookup_case(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(dift::jit_lookup(c.f1, c.f2, c.flow, dift::LookupWindow{3}, 56));
    }
}

}  // namespace

BENCHMARK(BM_conv2d_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conv2d_openmp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_jit_lookup_serial)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_jit_lookup_openmp)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
