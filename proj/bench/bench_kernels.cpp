// Serial reference vs OpenMP kernels. Run with QCK_THREADS / OMP_NUM_THREADS
// set to compare scaling.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "qck/kernels.hpp"

namespace {

using namespace qck;
using namespace qck::kernels;

std::vector<GaussianKernel> random_kernels(int n, int size) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> pos(0.0, size);
    std::uniform_real_distribution<double> bw(1.0, 15.0);
    std::vector<GaussianKernel> ks;
    for (int i = 0; i < n; ++i) {
        const double b = bw(rng);
        ks.push_back({pos(rng), pos(rng), b, 4.0 * b});
    }
    return ks;
}

template <auto Fn>
void BM_Splat(benchmark::State& state) {
    const int size = 512;
    const auto ks = random_kernels(static_cast<int>(state.range(0)), size);
    Raster<double> grid(size, size, 0.0);
    for (auto _ : state) {
        std::fill(grid.values.begin(), grid.values.end(), 0.0);
        Fn(ks, KernelScale::unit_mass, grid);
        benchmark::DoNotOptimize(grid.values.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct ConvData {
    ConvShape s;
    std::vector<double> in, w, b, out;
    explicit ConvData(int c) : s{c, 2 * c, 56, 56, 3} {
        std::mt19937 rng(11);
        std::normal_distribution<double> n(0.0, 1.0);
        in.resize(s.in_size());
        w.resize(s.weight_size());
        b.resize(static_cast<std::size_t>(s.out_channels));
        out.resize(s.out_size());
        for (auto* v : {&in, &w, &b})
            for (double& x : *v) x = n(rng);
    }
};

template <auto Fn>
void BM_ConvForward(benchmark::State& state) {
    ConvData d(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        Fn(d.s, d.in, d.w, d.b, d.out);
        benchmark::DoNotOptimize(d.out.data());
    }
}

template <auto Fn>
void BM_ConvBackwardParams(benchmark::State& state) {
    ConvData d(static_cast<int>(state.range(0)));
    std::vector<double> gw(d.w.size()), gb(d.b.size());
    for (auto _ : state) {
        Fn(d.s, d.in, d.out, gw, gb);
        benchmark::DoNotOptimize(gw.data());
    }
}

}  // namespace

BENCHMARK(BM_Splat<&reference::splat_gaussians>)->Name("splat/reference")->Arg(100)->Arg(2000);
BENCHMARK(BM_Splat<&splat_gaussians>)->Name("splat/omp")->Arg(100)->Arg(2000);
BENCHMARK(BM_ConvForward<&reference::conv_forward>)->Name("conv_forward/reference")->Arg(4)->Arg(16);
BENCHMARK(BM_ConvForward<&conv_forward>)->Name("conv_forward/omp")->Arg(4)->Arg(16);
BENCHMARK(BM_ConvBackwardParams<&reference::conv_backward_params>)->Name("conv_backward_params/reference")->Arg(4)->Arg(16);
BENCHMARK(BM_ConvBackwardParams<&conv_backward_params>)->Name("conv_backward_params/omp")->Arg(4)->Arg(16);

BENCHMARK_MAIN();
