#include "east/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "east/parallel.hpp"

namespace east::trainer {

void TrainConfig::validate() const {
    if (base_lr < 0.0) throw ConfigError("base_lr must be nonnegative");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (steps < 1) throw ConfigError("steps must be at least 1");
    if (warmup_frac < 0.0 || warmup_frac >= 1.0)
        throw ConfigError("warmup fraction must lie in [0, 1)");
    if (loss.l2_weight < 0.0) throw ConfigError("l2_weight must be nonnegative");
}

double softmax_nll(const model::Logits& logits, int label, model::Logits* dlogits) {
    if (label < 0 || label >= int(logits.size()))
        throw ContractError("label out of range");
    double mx = -1e300;
    for (double v : logits) {
        if (!std::isfinite(v)) throw NumericError("non-finite logit");
        mx = std::max(mx, v);
    }
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    if (dlogits) {
        dlogits->resize(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i)
            (*dlogits)[i] = std::exp(logits[i] - mx) / z;
        (*dlogits)[std::size_t(label)] -= 1.0;
    }
    return lse - logits[std::size_t(label)];
}

LossBreakdown compound_loss(const model::Logits& y_pred, const model::Logits* y_oracle,
                            int label, const LossFlags& flags) {
    LossBreakdown lb;
    lb.l_pred = softmax_nll(y_pred, label);
    if (flags.use_oracle && y_oracle) lb.l_oracle = softmax_nll(*y_oracle, label);
    lb.total = lb.l_pred + (flags.use_oracle ? lb.l_oracle : 0.0) +
               (flags.use_l2 ? flags.l2_weight * lb.l_l2 : 0.0);
    return lb;
}

double l2_alignment(const Mat& fhat, const Mat& oracle_future) {
    if (fhat.rows != oracle_future.rows || fhat.cols != oracle_future.cols)
        throw ContractError("l2 alignment length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < fhat.v.size(); ++i) {
        const double d = fhat.v[i] - oracle_future.v[i];
        acc += d * d;
    }
    return acc / double(fhat.v.size());
}

LossBreakdown run_sample(const model::EastModel& model,
                         const video::LabeledVideo& lv, double rho,
                         const sampler::SamplingConfig& scfg,
                         const masker::MaskConfig& mcfg, const LossFlags& flags,
                         Rng& rng, model::GradBuffer* grad) {
    const int total = lv.video.frames;
    const bool has_future = sampler::boundary_index(total, rho) < total;

    video::Clip observed, unobserved;
    if (has_future) {
        sampler::ClipPair pair = sampler::build_clip_pair(lv.video, rho, scfg);
        observed = std::move(pair.observed);
        unobserved = std::move(pair.unobserved);
    } else {
        observed = sampler::build_inference_clip(lv.video, rho, scfg);
    }

    // Each half is masked from its own pixels only.
    masker::MaskSelection sel_o = masker::make_mask(observed, mcfg, rng);
    masker::MaskSelection sel_u;
    if (has_future) sel_u = masker::make_mask(unobserved, mcfg, rng);

    const bool want_oracle = has_future && (flags.use_oracle || flags.use_l2);

    model::PredCache pc;
    model::OracleCache oc;
    const model::Logits y_pred = model.forward_pred(observed, sel_o, &pc);
    model::Logits y_oracle;
    if (want_oracle)
        y_oracle = model.forward_oracle(observed, sel_o, unobserved, sel_u, &oc);

    LossFlags eff = flags;
    eff.use_oracle = flags.use_oracle && has_future;
    eff.use_l2 = flags.use_l2 && has_future;

    LossBreakdown lb = compound_loss(y_pred, want_oracle ? &y_oracle : nullptr,
                                     lv.label, eff);

    const int steps = model.config().frames_per_half / model.config().tubelet;
    Mat oracle_future;
    if (eff.use_l2) {
        oracle_future = Mat(steps, model.config().feat);
        for (int s = 0; s < steps; ++s)
            std::copy(oc.pooled.row(steps + s), oc.pooled.row(steps + s) + oc.pooled.cols,
                      oracle_future.row(s));
        lb.l_l2 = l2_alignment(pc.dec.fhat, oracle_future);
        lb.total = lb.l_pred + (eff.use_oracle ? lb.l_oracle : 0.0) +
                   eff.l2_weight * lb.l_l2;
    }
    if (!std::isfinite(lb.total)) throw NumericError("non-finite training loss");

    if (grad) {
        model::Logits d_pred;
        softmax_nll(y_pred, lv.label, &d_pred);
        Mat dfhat_extra;
        Mat dpooled_extra;
        if (eff.use_l2) {
            const double scale = 2.0 * eff.l2_weight / double(pc.dec.fhat.v.size());
            dfhat_extra = Mat(steps, model.config().feat);
            dpooled_extra = Mat(oc.pooled.rows, oc.pooled.cols);
            for (int s = 0; s < steps; ++s) {
                for (int j = 0; j < model.config().feat; ++j) {
                    const double d =
                        (pc.dec.fhat.at(s, j) - oracle_future.at(s, j)) * scale;
                    dfhat_extra.at(s, j) = d;
                    dpooled_extra.at(steps + s, j) = -d;
                }
            }
        }
        model.backward_pred(pc, d_pred, *grad, eff.use_l2 ? &dfhat_extra : nullptr);
        if (want_oracle) {
            model::Logits d_oracle(y_oracle.size(), 0.0);
            if (eff.use_oracle) softmax_nll(y_oracle, lv.label, &d_oracle);
            model.backward_oracle(oc, d_oracle, *grad,
                                  eff.use_l2 ? &dpooled_extra : nullptr);
        }
    }
    return lb;
}

Trainer::Trainer(const TrainRecipe& recipe)
    : recipe_(recipe), model_(recipe.model) {
    recipe_.opt.validate();
    recipe_.sampling.validate();
    Rng init_rng(derive_seed(recipe_.opt.seed, 0x1217, 0x717));
    model_.init_params(init_rng);
    adam_m_.assign(model_.params().size(), 0.0);
    adam_v_.assign(model_.params().size(), 0.0);
}

double Trainer::lr_at(int step) const {
    const TrainConfig& tc = recipe_.opt;
    const double eff = tc.base_lr * double(tc.batch_size) / tc.lr_ref_batch;
    const int warmup = int(std::lround(tc.warmup_frac * tc.steps));
    if (warmup > 0 && step < warmup) return eff * double(step + 1) / warmup;
    const int span = std::max(1, tc.steps - warmup);
    const double t = double(step - warmup) / span;
    return eff * 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(1.0, t)));
}

LossBreakdown Trainer::step(const std::vector<video::LabeledVideo>& data) {
    if (data.empty()) throw ContractError("empty training dataset");
    const TrainConfig& tc = recipe_.opt;
    const int b = tc.batch_size;
    const std::size_t psize = model_.params().size();

    sample_grads_.resize(std::size_t(b));
    sample_losses_.assign(std::size_t(b), LossBreakdown{});
    for (auto& g : sample_grads_) g.assign(psize, 0.0);

    // Per-sample streams keyed by (seed, step, index): the batch is a pure
    // function of the seed no matter how it is scheduled.
    parallel_for(std::size_t(b), tc.threads, [&](std::size_t i) {
        Rng rng(derive_seed(tc.seed, std::uint64_t(step_), i));
        const std::size_t idx = rng.uniform(data.size());
        const double rho = sampler::sample_rho(recipe_.sampling, rng);
        sample_losses_[i] = run_sample(model_, data[idx], rho, recipe_.sampling,
                                       recipe_.mask, tc.loss, rng, &sample_grads_[i]);
    });

    LossBreakdown mean;
    std::vector<double> grad(psize, 0.0);
    for (int i = 0; i < b; ++i) {
        const LossBreakdown& lb = sample_losses_[std::size_t(i)];
        mean.l_pred += lb.l_pred;
        mean.l_oracle += lb.l_oracle;
        mean.l_l2 += lb.l_l2;
        mean.total += lb.total;
        const auto& g = sample_grads_[std::size_t(i)];
        for (std::size_t q = 0; q < psize; ++q) grad[q] += g[q];
    }
    const double inv_b = 1.0 / b;
    mean.l_pred *= inv_b;
    mean.l_oracle *= inv_b;
    mean.l_l2 *= inv_b;
    mean.total *= inv_b;
    for (double& g : grad) g *= inv_b;

    const double lr = lr_at(step_);
    const double bc1 = 1.0 - std::pow(tc.beta1, step_ + 1);
    const double bc2 = 1.0 - std::pow(tc.beta2, step_ + 1);
    auto& data_vec = model_.params().data();
    for (const model::ParamInfo& info : model_.params().infos()) {
        const double wd = info.decay ? tc.weight_decay : 0.0;
        for (std::size_t q = info.offset; q < info.offset + info.size(); ++q) {
            adam_m_[q] = tc.beta1 * adam_m_[q] + (1.0 - tc.beta1) * grad[q];
            adam_v_[q] = tc.beta2 * adam_v_[q] + (1.0 - tc.beta2) * grad[q] * grad[q];
            const double mhat = adam_m_[q] / bc1;
            const double vhat = adam_v_[q] / bc2;
            data_vec[q] -= lr * (mhat / (std::sqrt(vhat) + tc.adam_eps) + wd * data_vec[q]);
        }
    }
    ++step_;
    return mean;
}

// ---------------------------------------------------------------------------
// grad_check
// ---------------------------------------------------------------------------

TrainRecipe tiny_recipe(model::DecoderVariant variant, model::ClassifierMode mode) {
    TrainRecipe r;
    r.model.feat = 8;
    r.model.enc_layers = 1;
    r.model.enc_heads = 2;
    r.model.dec_variant = variant;
    r.model.dec_layers = 1;
    r.model.dec_heads = 2;
    r.model.patch = 4;
    r.model.tubelet = 2;
    r.model.frames_per_half = 4;
    r.model.height = 8;
    r.model.width = 8;
    r.model.channels = 1;
    r.model.num_classes = 3;
    r.model.classifier = mode;
    r.sampling.frames_per_half = 4;
    r.mask.patch = 4;
    r.mask.tubelet = 2;
    r.mask.masked_fraction = 0.5;
    r.mask.kind = masker::MaskKind::kDifference;
    r.opt.loss.use_oracle = true;
    r.opt.loss.use_l2 = true;
    r.opt.loss.l2_weight = 0.1;
    return r;
}

GradCheckReport grad_check(const TrainRecipe& recipe, std::uint64_t seed,
                           int n_params, double fd_step, double tolerance) {
    model::EastModel model(recipe.model);
    Rng init_rng(derive_seed(seed, 0x1217, 0x717));
    model.init_params(init_rng);
    // Jitter every coordinate away from its init. The zero-initialized
    // classifier would otherwise block gradient flow to everything upstream
    // and make the check vacuous.
    {
        Rng jitter(derive_seed(seed, 0x71e2, 3));
        for (double& p : model.params().data()) p += 0.02 * jitter.normal();
    }

    // Random-pixel video; gradients do not need plausible content.
    Rng data_rng(derive_seed(seed, 0xda7a, 1));
    video::LabeledVideo lv;
    lv.video = video::VideoTensor(4 * recipe.model.frames_per_half, recipe.model.height,
                                  recipe.model.width, recipe.model.channels);
    for (auto& px : lv.video.pixels) px = std::uint8_t(data_rng.uniform(256));
    lv.label = int(data_rng.uniform(std::uint64_t(recipe.model.num_classes)));

    const double rho = 0.5;
    auto loss_value = [&]() {
        Rng rng(derive_seed(seed, 0x10, 0x55));
        return run_sample(model, lv, rho, recipe.sampling, recipe.mask,
                          recipe.opt.loss, rng, nullptr)
            .total;
    };

    model::GradBuffer grad(model.params().size(), 0.0);
    {
        Rng rng(derive_seed(seed, 0x10, 0x55));
        run_sample(model, lv, rho, recipe.sampling, recipe.mask, recipe.opt.loss, rng,
                   &grad);
    }

    // Sample distinct coordinates via a partial shuffle.
    const std::size_t psize = model.params().size();
    std::vector<std::size_t> order(psize);
    std::iota(order.begin(), order.end(), std::size_t(0));
    Rng pick(derive_seed(seed, 0x9a3, 7));
    const int n = std::min<int>(n_params, int(psize));
    for (int i = 0; i < n; ++i) {
        const std::size_t j = i + pick.uniform(psize - std::size_t(i));
        std::swap(order[std::size_t(i)], order[j]);
    }

    GradCheckReport rep;
    rep.sampled = n;
    rep.tolerance = tolerance;
    auto& params = model.params().data();
    for (int i = 0; i < n; ++i) {
        const std::size_t q = order[std::size_t(i)];
        const double saved = params[q];
        params[q] = saved + fd_step;
        const double lp = loss_value();
        params[q] = saved - fd_step;
        const double lm = loss_value();
        params[q] = saved;
        const double fd = (lp - lm) / (2.0 * fd_step);
        const double an = grad[q];
        const double mag = std::max(std::abs(fd), std::abs(an));
        if (mag < 1e-8) {
            ++rep.zero_grad;
            continue;
        }
        ++rep.checked;
        const double rel = std::abs(an - fd) / mag;
        rep.max_rel_error = std::max(rep.max_rel_error, rel);
        if (rel < tolerance) ++rep.within_tol;
    }
    return rep;
}

}  // namespace east::trainer
