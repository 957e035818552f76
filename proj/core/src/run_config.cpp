#include "east/run_config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace east::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": " + v);
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for " + key + ": " + v);
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid seed for " + key + ": " + v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("invalid boolean for " + key + ": " + v);
}

masker::MaskKind mask_kind_from(const std::string& v) {
    if (v == "difference") return masker::MaskKind::kDifference;
    if (v == "random") return masker::MaskKind::kRandom;
    if (v == "none") return masker::MaskKind::kNone;
    throw ConfigError("unknown mask kind: " + v);
}

const char* mask_kind_name(masker::MaskKind k) {
    switch (k) {
        case masker::MaskKind::kDifference: return "difference";
        case masker::MaskKind::kRandom: return "random";
        case masker::MaskKind::kNone: return "none";
    }
    return "?";
}

std::string format_grid(const std::vector<double>& grid) {
    // Re-emit as start:stop:step when evenly spaced, else a comma list.
    char buf[64];
    if (grid.size() >= 2) {
        const double step = grid[1] - grid[0];
        bool even = step > 0;
        for (std::size_t i = 1; even && i < grid.size(); ++i)
            even = std::abs(grid[i] - grid[i - 1] - step) < 1e-9;
        if (even) {
            std::snprintf(buf, sizeof buf, "%.6g:%.6g:%.6g", grid.front(), grid.back(),
                          step);
            return buf;
        }
    }
    std::string out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6g", grid[i]);
        if (i) out += ",";
        out += buf;
    }
    return out;
}

}  // namespace

std::vector<double> parse_rho_grid(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        double a, b, s;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &a, &b, &s) != 3 || s <= 0)
            throw ConfigError("bad rho grid (want start:stop:step): " + spec);
        for (double x = a; x <= b + 1e-9; x += s) out.push_back(x);
    } else {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(to_double("rho grid", item));
        }
    }
    if (out.empty()) throw ConfigError("empty rho grid: " + spec);
    for (double r : out)
        if (r <= 0.0 || r > 1.0) throw ConfigError("rho grid values must lie in (0, 1]");
    return out;
}

RunConfig default_run_config() { return RunConfig{}; }

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = to_u64(key, value);
    else if (key == "threads") cfg.threads = to_int(key, value);
    else if (key == "data.n1") cfg.data.n1 = to_int(key, value);
    else if (key == "data.n2") cfg.data.n2 = to_int(key, value);
    else if (key == "data.frames") cfg.data.frames = to_int(key, value);
    else if (key == "data.height") cfg.data.height = to_int(key, value);
    else if (key == "data.width") cfg.data.width = to_int(key, value);
    else if (key == "data.sprite_size") cfg.data.sprite_size = to_int(key, value);
    else if (key == "data.noise_std") cfg.data.noise_std = to_double(key, value);
    else if (key == "data.phase_boundary") cfg.data.phase_boundary = to_double(key, value);
    else if (key == "data.videos_per_class") cfg.data.videos_per_class = to_int(key, value);
    else if (key == "data.seed") cfg.data.seed = to_u64(key, value);
    else if (key == "sample.frames_per_half") cfg.sampling.frames_per_half = to_int(key, value);
    else if (key == "sample.mode") {
        if (value == "randomized") cfg.sampling.mode = sampler::SamplingMode::kRandomized;
        else if (value == "fixed") cfg.sampling.mode = sampler::SamplingMode::kFixed;
        else throw ConfigError("unknown sampling mode: " + value);
    }
    else if (key == "sample.fixed_rho") cfg.sampling.fixed_rho = to_double(key, value);
    else if (key == "sample.rho_grid") cfg.sampling.rho_grid = parse_rho_grid(value);
    else if (key == "mask.kind") cfg.mask.kind = mask_kind_from(value);
    else if (key == "mask.patch") cfg.mask.patch = to_int(key, value);
    else if (key == "mask.tubelet") cfg.mask.tubelet = to_int(key, value);
    else if (key == "mask.k") cfg.mask.masked_fraction = to_double(key, value);
    else if (key == "model.feat") cfg.feat = to_int(key, value);
    else if (key == "model.enc_layers") cfg.enc_layers = to_int(key, value);
    else if (key == "model.enc_heads") cfg.enc_heads = to_int(key, value);
    else if (key == "model.dec_variant")
        cfg.dec_variant = model::decoder_variant_from_string(value);
    else if (key == "model.dec_layers") cfg.dec_layers = to_int(key, value);
    else if (key == "model.dec_heads") cfg.dec_heads = to_int(key, value);
    else if (key == "model.classifier")
        cfg.classifier = model::classifier_mode_from_string(value);
    else if (key == "model.mlp_ratio") cfg.mlp_ratio = to_int(key, value);
    else if (key == "train.base_lr") cfg.base_lr = to_double(key, value);
    else if (key == "train.weight_decay") cfg.weight_decay = to_double(key, value);
    else if (key == "train.batch_size") cfg.batch_size = to_int(key, value);
    else if (key == "train.steps") cfg.steps = to_int(key, value);
    else if (key == "train.warmup_frac") cfg.warmup_frac = to_double(key, value);
    else if (key == "train.use_oracle") cfg.use_oracle = to_bool(key, value);
    else if (key == "train.use_l2") cfg.use_l2 = to_bool(key, value);
    else if (key == "train.l2_weight") cfg.l2_weight = to_double(key, value);
    else if (key == "train.log_every") cfg.log_every = to_int(key, value);
    else if (key == "train.checkpoint_every") cfg.checkpoint_every = to_int(key, value);
    else if (key == "eval.rho_grid") cfg.eval_grid = parse_rho_grid(value);
    else throw ConfigError("unknown config key: " + key);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open config file");
    RunConfig cfg = default_run_config();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
        apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& key_values) {
    for (const std::string& kv : key_values) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must look like key=value: " + kv);
        apply_key(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
}

std::string serialize(const RunConfig& cfg) {
    std::ostringstream os;
    char buf[128];
    auto put = [&](const char* key, const std::string& v) {
        os << key << " = " << v << "\n";
    };
    auto putd = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        put(key, buf);
    };
    put("seed", std::to_string(cfg.seed));
    put("threads", std::to_string(cfg.threads));
    put("data.n1", std::to_string(cfg.data.n1));
    put("data.n2", std::to_string(cfg.data.n2));
    put("data.frames", std::to_string(cfg.data.frames));
    put("data.height", std::to_string(cfg.data.height));
    put("data.width", std::to_string(cfg.data.width));
    put("data.sprite_size", std::to_string(cfg.data.sprite_size));
    putd("data.noise_std", cfg.data.noise_std);
    putd("data.phase_boundary", cfg.data.phase_boundary);
    put("data.videos_per_class", std::to_string(cfg.data.videos_per_class));
    put("data.seed", std::to_string(cfg.data.seed));
    put("sample.frames_per_half", std::to_string(cfg.sampling.frames_per_half));
    put("sample.mode", cfg.sampling.mode == sampler::SamplingMode::kRandomized
                           ? "randomized"
                           : "fixed");
    putd("sample.fixed_rho", cfg.sampling.fixed_rho);
    put("sample.rho_grid", format_grid(cfg.sampling.rho_grid));
    put("mask.kind", mask_kind_name(cfg.mask.kind));
    put("mask.patch", std::to_string(cfg.mask.patch));
    put("mask.tubelet", std::to_string(cfg.mask.tubelet));
    putd("mask.k", cfg.mask.masked_fraction);
    put("model.feat", std::to_string(cfg.feat));
    put("model.enc_layers", std::to_string(cfg.enc_layers));
    put("model.enc_heads", std::to_string(cfg.enc_heads));
    put("model.dec_variant", model::to_string(cfg.dec_variant));
    put("model.dec_layers", std::to_string(cfg.dec_layers));
    put("model.dec_heads", std::to_string(cfg.dec_heads));
    put("model.classifier", model::to_string(cfg.classifier));
    put("model.mlp_ratio", std::to_string(cfg.mlp_ratio));
    putd("train.base_lr", cfg.base_lr);
    putd("train.weight_decay", cfg.weight_decay);
    put("train.batch_size", std::to_string(cfg.batch_size));
    put("train.steps", std::to_string(cfg.steps));
    putd("train.warmup_frac", cfg.warmup_frac);
    put("train.use_oracle", cfg.use_oracle ? "true" : "false");
    put("train.use_l2", cfg.use_l2 ? "true" : "false");
    putd("train.l2_weight", cfg.l2_weight);
    put("train.log_every", std::to_string(cfg.log_every));
    put("train.checkpoint_every", std::to_string(cfg.checkpoint_every));
    put("eval.rho_grid", format_grid(cfg.eval_grid));
    return os.str();
}

std::string config_hash(const RunConfig& cfg) {
    const std::string text = serialize(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

model::ModelConfig model_config_for(const RunConfig& cfg,
                                    const video::DatasetHeader& header) {
    if (header.frames < 2 || header.frames % 2 != 0)
        throw ConfigError("dataset videos must have an even frame count >= 2");
    model::ModelConfig mc;
    mc.feat = cfg.feat;
    mc.enc_layers = cfg.enc_layers;
    mc.enc_heads = cfg.enc_heads;
    mc.dec_variant = cfg.dec_variant;
    mc.dec_layers = cfg.dec_layers;
    mc.dec_heads = cfg.dec_heads;
    mc.patch = cfg.mask.patch;
    mc.tubelet = cfg.mask.tubelet;
    mc.frames_per_half = cfg.sampling.frames_per_half;
    mc.height = int(header.height);
    mc.width = int(header.width);
    mc.channels = int(header.channels);
    mc.num_classes = int(header.num_classes);
    mc.classifier = cfg.classifier;
    mc.mlp_ratio = cfg.mlp_ratio;
    return mc;
}

trainer::TrainRecipe recipe_for(const RunConfig& cfg,
                                const video::DatasetHeader& header) {
    trainer::TrainRecipe r;
    r.model = model_config_for(cfg, header);
    r.sampling = cfg.sampling;
    r.mask = cfg.mask;
    r.opt.base_lr = cfg.base_lr;
    r.opt.weight_decay = cfg.weight_decay;
    r.opt.batch_size = cfg.batch_size;
    r.opt.steps = cfg.steps;
    r.opt.warmup_frac = cfg.warmup_frac;
    r.opt.seed = cfg.seed;
    r.opt.loss.use_oracle = cfg.use_oracle;
    r.opt.loss.use_l2 = cfg.use_l2;
    r.opt.loss.l2_weight = cfg.l2_weight;
    r.opt.threads = cfg.threads;
    return r;
}

}  // namespace east::cli
