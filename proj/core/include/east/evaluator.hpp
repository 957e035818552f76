#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "east/masker.hpp"
#include "east/model.hpp"
#include "east/sampler.hpp"
#include "east/trainer.hpp"
#include "east/video.hpp"

namespace east::evaluator {

struct MetricsRow {
    double rho = 0.0;
    double top1 = 0.0;
    int n = 0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string checkpoint_id;

    double mean_top1() const;
    double top1_at(double rho) const;  // nearest-row lookup within 1e-9
};

// Classifier under test. It receives a prefix-built clip and its mask
// selection and nothing else; in particular no observation ratio, which is
// what keeps the model agnostic to it.
using PredictFn =
    std::function<model::Logits(const video::Clip&, const masker::MaskSelection&)>;

// Tally from the instrumented frame accessor over one evaluation sweep.
struct LeakageStats {
    std::uint64_t frame_reads = 0;
    std::uint64_t reads_past_boundary = 0;
};

// Unified protocol: one classifier, every rho in the grid, prefix-only
// access. Clips are cut through an instrumented frame guard; any read at or
// past ⌊rho*T_d⌋ fails the run with LeakageError. Masking matches training
// (mask_cfg), computed from the observed clip alone.
MetricsTable evaluate(const PredictFn& predict,
                      const std::vector<video::LabeledVideo>& dataset,
                      const std::vector<double>& rho_grid,
                      const sampler::SamplingConfig& sampling,
                      const masker::MaskConfig& mask_cfg, int threads = 0,
                      std::uint64_t mask_seed = 0, LeakageStats* stats = nullptr);

PredictFn predictor_of(const model::EastModel& model);

void write_metrics_csv(const MetricsTable& table, const std::string& path);
MetricsTable read_metrics_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Analytic FLOP / token accounting
// ---------------------------------------------------------------------------

// Per transformer layer over n tokens of width f:
//   attention  4*n^2*f            (score + value mixing)
//   projection 4*n*f^2            (qkv + output projections)
//   mlp        2*n*f*(ratio*f)*2  (two linears)
struct StackFlops {
    double attn = 0.0;
    double proj = 0.0;
    double total() const { return attn + proj; }
};

StackFlops stack_flops(std::int64_t n_tokens, int layers, int feat, int mlp_ratio);

struct FlopReport {
    std::int64_t tokens_pred = 0;     // retained tokens for the present pass
    std::int64_t tokens_oracle = 0;   // 0 when the oracle pass is excluded
    double attn_flops = 0.0;
    double proj_flops = 0.0;
    double total_flops = 0.0;
    std::int64_t peak_tokens = 0;     // max simultaneous tokens, memory proxy
};

// Forward-pass cost at masking level mask_k over a clip_len-frame clip.
// include_oracle adds the full-clip training pass (2*clip_len frames).
FlopReport count_flops(const model::ModelConfig& cfg, double mask_k, int clip_len,
                       bool include_oracle);

std::string format_flop_report(const FlopReport& rep);

// ---------------------------------------------------------------------------
// Comparison harnesses (sampling strategies, masking strategies)
// ---------------------------------------------------------------------------

struct Arm {
    std::string name;
    trainer::TrainRecipe recipe;
};

struct ArmCurve {
    std::string arm;
    std::uint64_t seed = 0;
    MetricsTable metrics;
};

struct CompareReport {
    std::vector<ArmCurve> rows;  // |arms| x |seeds| entries

    std::vector<double> values(const std::string& arm,
                               const std::function<double(const MetricsTable&)>& f) const;
};

// Trains every (arm, seed) pair under an identical step budget and
// evaluates each on the shared grid. Budget mismatches across arms are
// configuration errors.
CompareReport compare_arms(const std::vector<video::LabeledVideo>& train_data,
                           const std::vector<video::LabeledVideo>& test_data,
                           const std::vector<Arm>& arms,
                           const std::vector<std::uint64_t>& seeds,
                           const std::vector<double>& rho_grid, int threads = 0,
                           const std::function<void(const std::string&, int)>& progress = {});

// Difference vs random masking at equal budgets (kinds x k values).
CompareReport compare_masking(const std::vector<video::LabeledVideo>& train_data,
                              const std::vector<video::LabeledVideo>& test_data,
                              const trainer::TrainRecipe& base,
                              const std::vector<std::pair<masker::MaskKind, double>>& arms,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<double>& rho_grid, int threads = 0);

// Randomized-rho training vs fixed-rho specialists.
CompareReport compare_sampling(const std::vector<video::LabeledVideo>& train_data,
                               const std::vector<video::LabeledVideo>& test_data,
                               const trainer::TrainRecipe& base,
                               const std::vector<double>& fixed_rhos,
                               const std::vector<std::uint64_t>& seeds,
                               const std::vector<double>& rho_grid, int threads = 0);

double median(std::vector<double> xs);

}  // namespace east::evaluator
