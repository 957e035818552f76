#pragma once

#include <cstdint>
#include <vector>

#include "east/masker.hpp"
#include "east/model.hpp"
#include "east/sampler.hpp"
#include "east/video.hpp"

namespace east::trainer {

struct LossFlags {
    bool use_oracle = true;
    bool use_l2 = false;
    double l2_weight = 1.0;
};

struct LossBreakdown {
    double l_pred = 0.0;
    double l_oracle = 0.0;
    double l_l2 = 0.0;
    double total = 0.0;
};

struct TrainConfig {
    double base_lr = 1e-3;      // scaled by batch_size / lr_ref_batch
    double weight_decay = 0.05;
    int batch_size = 8;
    int steps = 5000;
    double warmup_frac = 0.05;  // linear warmup fraction of total steps
    std::uint64_t seed = 1;
    LossFlags loss;
    int threads = 0;            // 0 = hardware concurrency
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double lr_ref_batch = 256.0;

    void validate() const;
};

// Everything needed to train one model end to end.
struct TrainRecipe {
    model::ModelConfig model;
    sampler::SamplingConfig sampling;
    masker::MaskConfig mask;
    TrainConfig opt;
};

// Negative log-likelihood of the true class under softmax, log-sum-exp
// stable. dlogits (softmax minus one-hot) is written when given.
double softmax_nll(const model::Logits& logits, int label,
                   model::Logits* dlogits = nullptr);

// Sum of classification NLLs; disabled terms contribute exactly zero.
LossBreakdown compound_loss(const model::Logits& y_pred, const model::Logits* y_oracle,
                            int label, const LossFlags& flags);

// Mean squared difference between the forecast tokens and the oracle pooled
// features at the future time steps. Ablation reproduction only.
double l2_alignment(const Mat& fhat, const Mat& oracle_future);

// One training sample: clip pair, independent per-half masking, both
// forward passes, loss, and (when grad != nullptr) backward accumulation.
LossBreakdown run_sample(const model::EastModel& model,
                         const video::LabeledVideo& lv, double rho,
                         const sampler::SamplingConfig& scfg,
                         const masker::MaskConfig& mcfg, const LossFlags& flags,
                         Rng& rng, model::GradBuffer* grad);

class Trainer {
public:
    explicit Trainer(const TrainRecipe& recipe);

    // One optimizer step over a freshly drawn batch. Deterministic given
    // (recipe, seed, dataset) regardless of the thread count.
    LossBreakdown step(const std::vector<video::LabeledVideo>& data);

    double lr_at(int step) const;
    int current_step() const { return step_; }
    model::EastModel& model() { return model_; }
    const model::EastModel& model() const { return model_; }
    const TrainRecipe& recipe() const { return recipe_; }

private:
    TrainRecipe recipe_;
    model::EastModel model_;
    std::vector<double> adam_m_, adam_v_;
    int step_ = 0;
    std::vector<model::GradBuffer> sample_grads_;
    std::vector<LossBreakdown> sample_losses_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient verification
// ---------------------------------------------------------------------------

struct GradCheckReport {
    int sampled = 0;       // parameter coordinates drawn
    int zero_grad = 0;     // flagged |analytic| and |fd| below threshold
    int checked = 0;       // sampled minus zero_grad
    int within_tol = 0;    // rel error < tolerance among checked
    double max_rel_error = 0.0;
    double tolerance = 1e-4;
    double pass_fraction() const {
        return checked == 0 ? 1.0 : double(within_tol) / checked;
    }
};

// Compares analytic gradients of the full training loss against central
// finite differences on a randomly generated sample. Deterministic given
// seed.
GradCheckReport grad_check(const TrainRecipe& recipe, std::uint64_t seed,
                           int n_params = 200, double fd_step = 1e-4,
                           double tolerance = 1e-4);

// The tiny geometry the verification harness runs at.
TrainRecipe tiny_recipe(model::DecoderVariant variant, model::ClassifierMode mode);

}  // namespace east::trainer
