// Serial vs OpenMP cost kernels, plus banded DTW, on synthetic guitar pieces.

#include "amtalign/kernels.hpp"
#include "synthetic.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

#include <algorithm>
#include <map>

using namespace amtalign;

namespace {

struct Fixture {
    kernels::ScoreFeatures score;
    kernels::AudioFeatures audio;
    std::size_t rows = 0, cols = 0;
};

const Fixture& fixture(int seconds) {
    static std::map<int, Fixture> cache;
    auto [it, fresh] = cache.try_emplace(seconds);
    if (fresh) {
        RollConfig grid;
        const auto notes = synth::guitar_piece(11, seconds);
        SimConfig sim;
        sim.seed = 3;
        const auto act = simulate_activations(synth::scale_time(notes, 1.1), seconds * 1.1 + 0.5, sim, grid);
        const auto roll = rasterize(notes, grid);
        it->second = {kernels::score_features(roll), kernels::audio_features(act, grid.onset_weight), roll.n_frames(),
                      act.n_frames()};
    }
    return it->second;
}

BandLayout layout_for(const Fixture& f, bool banded) {
    return banded ? BandLayout::sakoe_chiba(f.rows, f.cols, std::max(f.rows, f.cols) / 10)
                  : BandLayout::dense(f.rows, f.cols);
}

template <auto Kernel>
void BM_cost(benchmark::State& state) {
    const auto& f = fixture(static_cast<int>(state.range(0)));
    CostMatrix out(layout_for(f, state.range(1) != 0));
    for (auto _ : state) {
        Kernel(f.score, f.audio, 1e-6, out);
        benchmark::ClobberMemory();
    }
    state.counters["cells/s"] =
        benchmark::Counter(static_cast<double>(out.layout().cell_count()), benchmark::Counter::kIsIterationInvariantRate);
    state.counters["threads"] = omp_get_max_threads();
}

void BM_dtw(benchmark::State& state) {
    const auto& f = fixture(static_cast<int>(state.range(0)));
    CostMatrix cost(layout_for(f, true));
    kernels::cost_parallel(f.score, f.audio, 1e-6, cost);
    for (auto _ : state) benchmark::DoNotOptimize(dtw(cost).total_cost);
    state.counters["cells/s"] = benchmark::Counter(static_cast<double>(cost.layout().cell_count()),
                                                   benchmark::Counter::kIsIterationInvariantRate);
}

}  // namespace

BENCHMARK(BM_cost<kernels::cost_serial>)->Name("cost_serial")->ArgsProduct({{30, 120}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_cost<kernels::cost_parallel>)->Name("cost_parallel")->ArgsProduct({{30, 120}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dtw)->Arg(30)->Arg(120)->Arg(240)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
