#include "east/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "east/parallel.hpp"

namespace east::evaluator {

double MetricsTable::mean_top1() const {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rows) s += r.top1;
    return s / double(rows.size());
}

double MetricsTable::top1_at(double rho) const {
    for (const auto& r : rows)
        if (std::abs(r.rho - rho) < 1e-9) return r.top1;
    throw ContractError("no metrics row for rho");
}

MetricsTable evaluate(const PredictFn& predict,
                      const std::vector<video::LabeledVideo>& dataset,
                      const std::vector<double>& rho_grid,
                      const sampler::SamplingConfig& sampling,
                      const masker::MaskConfig& mask_cfg, int threads,
                      std::uint64_t mask_seed, LeakageStats* stats) {
    if (dataset.empty()) throw ContractError("empty evaluation dataset");
    MetricsTable table;
    LeakageStats tally;
    for (std::size_t ri = 0; ri < rho_grid.size(); ++ri) {
        const double rho = rho_grid[ri];
        std::vector<std::uint8_t> correct(dataset.size(), 0);
        std::vector<std::uint64_t> violations(dataset.size(), 0);
        std::vector<std::uint64_t> reads(dataset.size(), 0);
        parallel_for(dataset.size(), threads, [&](std::size_t i) {
            const video::LabeledVideo& lv = dataset[i];
            const int limit = sampler::boundary_index(lv.video.frames, rho);
            video::GuardedFrames guard(lv.video, limit);
            const video::Clip clip =
                sampler::build_inference_clip(lv.video, rho, sampling, &guard);
            Rng rng(derive_seed(mask_seed, ri, i));
            const masker::MaskSelection sel = masker::make_mask(clip, mask_cfg, rng);
            const model::Logits logits = predict(clip, sel);
            int arg = 0;
            for (std::size_t k = 1; k < logits.size(); ++k)
                if (logits[k] > logits[std::size_t(arg)]) arg = int(k);
            correct[i] = (arg == lv.label) ? 1 : 0;
            violations[i] = guard.violations();
            reads[i] = guard.reads();
        });
        std::uint64_t bad = 0;
        for (auto v : violations) bad += v;
        for (auto r : reads) tally.frame_reads += r;
        tally.reads_past_boundary += bad;
        if (bad > 0)
            throw LeakageError("evaluation read " + std::to_string(bad) +
                               " frames at or past the observation boundary");
        int hits = 0;
        for (auto c : correct) hits += c;
        table.rows.push_back({rho, double(hits) / double(dataset.size()),
                              int(dataset.size())});
    }
    if (stats) *stats = tally;
    return table;
}

PredictFn predictor_of(const model::EastModel& model) {
    return [&model](const video::Clip& clip, const masker::MaskSelection& sel) {
        return model.forward_pred(clip, sel);
    };
}

void write_metrics_csv(const MetricsTable& table, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError(path + ": cannot open for writing");
    std::fputs("rho,top1,n\n", f);
    for (const auto& r : table.rows)
        std::fprintf(f, "%.6g,%.6f,%d\n", r.rho, r.top1, r.n);
    std::fclose(f);
}

MetricsTable read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open for reading");
    std::string line;
    if (!std::getline(in, line) || line != "rho,top1,n")
        throw IoError(path + ": bad metrics header");
    MetricsTable t;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        MetricsRow r;
        if (std::sscanf(line.c_str(), "%lf,%lf,%d", &r.rho, &r.top1, &r.n) != 3)
            throw IoError(path + ": bad metrics row: " + line);
        t.rows.push_back(r);
    }
    return t;
}

// ---------------------------------------------------------------------------
// FLOP accounting
// ---------------------------------------------------------------------------

StackFlops stack_flops(std::int64_t n, int layers, int feat, int mlp_ratio) {
    StackFlops s;
    const double nd = double(n);
    const double f = double(feat);
    s.attn = double(layers) * 4.0 * nd * nd * f;
    s.proj = double(layers) * (4.0 * nd * f * f + 2.0 * nd * f * (mlp_ratio * f) * 2.0);
    return s;
}

FlopReport count_flops(const model::ModelConfig& cfg, double mask_k, int clip_len,
                       bool include_oracle) {
    cfg.validate();
    masker::MaskConfig mc;
    mc.patch = cfg.patch;
    mc.tubelet = cfg.tubelet;
    mc.masked_fraction = mask_k;
    const int kept = mc.kept_per_column(clip_len);
    const std::int64_t spatial = cfg.spatial_cells();
    const std::int64_t n_pred = std::int64_t(kept) * spatial;

    FlopReport rep;
    rep.tokens_pred = n_pred;
    StackFlops enc = stack_flops(n_pred, cfg.enc_layers, cfg.feat, cfg.mlp_ratio);
    rep.attn_flops += enc.attn;
    rep.proj_flops += enc.proj;
    rep.peak_tokens = n_pred;

    const int p = cfg.time_steps(cfg.frames_per_half);
    switch (cfg.dec_variant) {
        case model::DecoderVariant::kIdentity:
            break;
        case model::DecoderVariant::kDirect: {
            StackFlops dec = stack_flops(2 * p, cfg.dec_layers, cfg.feat, cfg.mlp_ratio);
            rep.attn_flops += dec.attn;
            rep.proj_flops += dec.proj;
            rep.peak_tokens = std::max<std::int64_t>(rep.peak_tokens, 2 * p);
            break;
        }
        case model::DecoderVariant::kAutoregressive: {
            for (int s = 0; s < p; ++s) {
                StackFlops dec =
                    stack_flops(p + s, cfg.dec_layers, cfg.feat, cfg.mlp_ratio);
                rep.attn_flops += dec.attn;
                rep.proj_flops += dec.proj;
            }
            rep.peak_tokens = std::max<std::int64_t>(rep.peak_tokens, 2 * p - 1);
            break;
        }
    }

    if (include_oracle) {
        const int kept_o = mc.kept_per_column(clip_len);  // per half
        const std::int64_t n_oracle = 2 * std::int64_t(kept_o) * spatial;
        rep.tokens_oracle = n_oracle;
        StackFlops enc_o = stack_flops(n_oracle, cfg.enc_layers, cfg.feat, cfg.mlp_ratio);
        rep.attn_flops += enc_o.attn;
        rep.proj_flops += enc_o.proj;
        rep.peak_tokens = std::max(rep.peak_tokens, n_oracle);
    }
    rep.total_flops = rep.attn_flops + rep.proj_flops;
    return rep;
}

std::string format_flop_report(const FlopReport& rep) {
    std::ostringstream os;
    os << "tokens_pred=" << rep.tokens_pred << "\n";
    os << "tokens_oracle=" << rep.tokens_oracle << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", rep.attn_flops);
    os << "attn_flops=" << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.6g", rep.proj_flops);
    os << "proj_flops=" << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.6g", rep.total_flops);
    os << "total_flops=" << buf << "\n";
    os << "peak_tokens=" << rep.peak_tokens << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Comparisons
// ---------------------------------------------------------------------------

std::vector<double> CompareReport::values(
    const std::string& arm, const std::function<double(const MetricsTable&)>& f) const {
    std::vector<double> out;
    for (const auto& row : rows)
        if (row.arm == arm) out.push_back(f(row.metrics));
    return out;
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw ContractError("median of empty set");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

CompareReport compare_arms(const std::vector<video::LabeledVideo>& train_data,
                           const std::vector<video::LabeledVideo>& test_data,
                           const std::vector<Arm>& arms,
                           const std::vector<std::uint64_t>& seeds,
                           const std::vector<double>& rho_grid, int threads,
                           const std::function<void(const std::string&, int)>& progress) {
    if (arms.empty() || seeds.empty()) throw ConfigError("need at least one arm and seed");
    for (const Arm& a : arms) {
        if (a.recipe.opt.steps != arms.front().recipe.opt.steps ||
            a.recipe.opt.batch_size != arms.front().recipe.opt.batch_size)
            throw ConfigError("arm '" + a.name + "' has a mismatched training budget");
    }
    CompareReport report;
    for (const Arm& arm : arms) {
        for (std::uint64_t seed : seeds) {
            trainer::TrainRecipe recipe = arm.recipe;
            recipe.opt.seed = seed;
            recipe.opt.threads = threads;
            trainer::Trainer tr(recipe);
            for (int s = 0; s < recipe.opt.steps; ++s) {
                tr.step(train_data);
                if (progress && (s + 1) % 500 == 0) progress(arm.name, s + 1);
            }
            // Inference masking mirrors training; fixed-rho arms still
            // evaluate under the unified prefix-only protocol.
            sampler::SamplingConfig eval_sampling = recipe.sampling;
            ArmCurve curve;
            curve.arm = arm.name;
            curve.seed = seed;
            curve.metrics =
                evaluate(predictor_of(tr.model()), test_data, rho_grid, eval_sampling,
                         recipe.mask, threads, derive_seed(seed, 0xe7a1, 0));
            curve.metrics.seed = seed;
            report.rows.push_back(std::move(curve));
        }
    }
    return report;
}

CompareReport compare_masking(const std::vector<video::LabeledVideo>& train_data,
                              const std::vector<video::LabeledVideo>& test_data,
                              const trainer::TrainRecipe& base,
                              const std::vector<std::pair<masker::MaskKind, double>>& arms,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<double>& rho_grid, int threads) {
    std::vector<Arm> built;
    for (const auto& [kind, k] : arms) {
        Arm a;
        a.recipe = base;
        a.recipe.mask.kind = kind;
        a.recipe.mask.masked_fraction = k;
        const char* kind_name = kind == masker::MaskKind::kDifference ? "difference"
                                : kind == masker::MaskKind::kRandom   ? "random"
                                                                      : "none";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s_k%.2f", kind_name, k);
        a.name = buf;
        built.push_back(std::move(a));
    }
    return compare_arms(train_data, test_data, built, seeds, rho_grid, threads);
}

CompareReport compare_sampling(const std::vector<video::LabeledVideo>& train_data,
                               const std::vector<video::LabeledVideo>& test_data,
                               const trainer::TrainRecipe& base,
                               const std::vector<double>& fixed_rhos,
                               const std::vector<std::uint64_t>& seeds,
                               const std::vector<double>& rho_grid, int threads) {
    std::vector<Arm> built;
    {
        Arm east;
        east.name = "east";
        east.recipe = base;
        east.recipe.sampling.mode = sampler::SamplingMode::kRandomized;
        built.push_back(std::move(east));
    }
    for (double rho : fixed_rhos) {
        Arm a;
        a.recipe = base;
        a.recipe.sampling.mode = sampler::SamplingMode::kFixed;
        a.recipe.sampling.fixed_rho = rho;
        char buf[64];
        std::snprintf(buf, sizeof buf, "fixed_%.1f", rho);
        a.name = buf;
        built.push_back(std::move(a));
    }
    return compare_arms(train_data, test_data, built, seeds, rho_grid, threads);
}

}  // namespace east::evaluator
