#pragma once

#include <string>
#include <vector>

#include "east/dataset_io.hpp"
#include "east/evaluator.hpp"
#include "east/masker.hpp"
#include "east/model.hpp"
#include "east/sampler.hpp"
#include "east/synthetic.hpp"
#include "east/trainer.hpp"

namespace east::cli {

// Merged view of every module's configuration. Files are line-oriented
// `key = value` with `#` comments; unknown keys are errors; flags override
// file values. The serialized form is echoed verbatim into run outputs.
struct RunConfig {
    std::uint64_t seed = 1;
    int threads = 0;

    video::SyntheticConfig data;
    sampler::SamplingConfig sampling;
    masker::MaskConfig mask;

    int feat = 32;
    int enc_layers = 2;
    int enc_heads = 4;
    model::DecoderVariant dec_variant = model::DecoderVariant::kDirect;
    int dec_layers = 4;
    int dec_heads = 4;
    model::ClassifierMode classifier = model::ClassifierMode::kShared;
    int mlp_ratio = 4;

    double base_lr = 1e-3;
    double weight_decay = 0.05;
    int batch_size = 8;
    int steps = 5000;
    double warmup_frac = 0.05;
    bool use_oracle = true;
    bool use_l2 = false;
    double l2_weight = 1.0;
    int log_every = 1;
    int checkpoint_every = 0;  // 0: only the final checkpoint

    std::vector<double> eval_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

// "start:stop:step" (inclusive of both ends within 1e-9) or a single value.
std::vector<double> parse_rho_grid(const std::string& spec);

RunConfig default_run_config();
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig load_run_config(const std::string& path);
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& key_values);
std::string serialize(const RunConfig& cfg);

// FNV-1a of the serialized config, hex string; stamped into metrics tables.
std::string config_hash(const RunConfig& cfg);

// Builds module configs. The dataset header is authoritative for geometry
// and class count.
model::ModelConfig model_config_for(const RunConfig& cfg,
                                    const video::DatasetHeader& header);
trainer::TrainRecipe recipe_for(const RunConfig& cfg,
                                const video::DatasetHeader& header);

}  // namespace east::cli
