// Forward/backward throughput with and without token masking. The masked
// configuration should come in near 2x on both, which is the whole point
// of difference masking.

#include <benchmark/benchmark.h>

#include "east/masker.hpp"
#include "east/model.hpp"
#include "east/sampler.hpp"
#include "east/synthetic.hpp"
#include "east/trainer.hpp"

using namespace east;

namespace {

model::ModelConfig bench_model() {
    model::ModelConfig mc;
    mc.feat = 32;
    mc.enc_layers = 2;
    mc.enc_heads = 4;
    mc.dec_variant = model::DecoderVariant::kDirect;
    mc.dec_layers = 4;
    mc.dec_heads = 4;
    mc.patch = 8;
    mc.tubelet = 2;
    mc.frames_per_half = 8;
    mc.height = 24;
    mc.width = 24;
    mc.channels = 1;
    mc.num_classes = 9;
    return mc;
}

struct Fixture {
    model::EastModel model;
    video::Clip observed, unobserved;
    masker::MaskConfig mask;

    explicit Fixture(double k) : model(bench_model()) {
        Rng rng(1);
        model.init_params(rng);
        video::SyntheticConfig dc;
        dc.videos_per_class = 1;
        auto data = video::generate_synthetic_dataset(dc);
        sampler::SamplingConfig scfg;
        auto pair = sampler::build_clip_pair(data[0].video, 0.5, scfg);
        observed = pair.observed;
        unobserved = pair.unobserved;
        mask.patch = 8;
        mask.tubelet = 2;
        mask.masked_fraction = k;
        mask.kind = k == 0.0 ? masker::MaskKind::kNone : masker::MaskKind::kDifference;
    }
};

void forward_pass(benchmark::State& state, double k) {
    Fixture fx(k);
    Rng rng(2);
    const auto sel = masker::make_mask(fx.observed, fx.mask, rng);
    for (auto _ : state) {
        auto logits = fx.model.forward_pred(fx.observed, sel);
        benchmark::DoNotOptimize(logits);
    }
}

void train_sample(benchmark::State& state, double k) {
    Fixture fx(k);
    trainer::LossFlags flags;
    video::LabeledVideo lv;
    video::SyntheticConfig dc;
    dc.videos_per_class = 1;
    lv = video::generate_synthetic_dataset(dc)[0];
    model::GradBuffer grad(fx.model.params().size(), 0.0);
    sampler::SamplingConfig scfg;
    for (auto _ : state) {
        Rng rng(3);
        std::fill(grad.begin(), grad.end(), 0.0);
        auto lb = trainer::run_sample(fx.model, lv, 0.5, scfg, fx.mask, flags, rng, &grad);
        benchmark::DoNotOptimize(lb);
    }
}

}  // namespace

static void BM_ForwardUnmasked(benchmark::State& s) { forward_pass(s, 0.0); }
static void BM_ForwardMaskedHalf(benchmark::State& s) { forward_pass(s, 0.5); }
static void BM_TrainSampleUnmasked(benchmark::State& s) { train_sample(s, 0.0); }
static void BM_TrainSampleMaskedHalf(benchmark::State& s) { train_sample(s, 0.5); }

BENCHMARK(BM_ForwardUnmasked);
BENCHMARK(BM_ForwardMaskedHalf);
BENCHMARK(BM_TrainSampleUnmasked);
BENCHMARK(BM_TrainSampleMaskedHalf);

BENCHMARK_MAIN();
