#include <benchmark/benchmark.h>

#include "east/masker.hpp"
#include "east/rng.hpp"

using namespace east;

namespace {

video::Clip make_clip(int t, int hw, std::uint64_t seed) {
    Rng rng(seed);
    video::Clip clip(t, hw, hw, 1);
    for (auto& px : clip.pixels) px = std::uint8_t(rng.uniform(256));
    return clip;
}

masker::MaskConfig cfg(double k) {
    masker::MaskConfig mc;
    mc.patch = 4;
    mc.tubelet = 2;
    mc.masked_fraction = k;
    return mc;
}

}  // namespace

static void BM_RankTubelets(benchmark::State& state) {
    const video::Clip clip = make_clip(8, int(state.range(0)), 1);
    for (auto _ : state) {
        auto r = masker::rank_tubelets(clip, cfg(0.5));
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_RankTubelets)->Arg(32)->Arg(64)->Arg(128);

static void BM_DifferenceMask(benchmark::State& state) {
    const video::Clip clip = make_clip(8, int(state.range(0)), 1);
    for (auto _ : state) {
        auto sel = masker::difference_mask(clip, cfg(0.5));
        benchmark::DoNotOptimize(sel);
    }
}
BENCHMARK(BM_DifferenceMask)->Arg(32)->Arg(64)->Arg(128);

static void BM_RandomMask(benchmark::State& state) {
    const video::Clip clip = make_clip(8, int(state.range(0)), 1);
    Rng rng(7);
    for (auto _ : state) {
        auto sel = masker::random_mask(clip, cfg(0.5), rng);
        benchmark::DoNotOptimize(sel);
    }
}
BENCHMARK(BM_RandomMask)->Arg(32)->Arg(64)->Arg(128);

BENCHMARK_MAIN();
