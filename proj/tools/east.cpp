#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "east/checkpoint.hpp"
#include "east/dataset_io.hpp"
#include "east/evaluator.hpp"
#include "east/run_config.hpp"
#include "east/svg.hpp"
#include "east/synthetic.hpp"
#include "east/trainer.hpp"

namespace fs = std::filesystem;
using namespace east;

namespace {

// Exit codes, also listed in --help:
//   0 success, 2 usage error, 3 configuration error, 4 I/O error,
//   5 checkpoint/dataset mismatch, 6 numeric/contract/leakage failure
constexpr int kExitConfig = 3;
constexpr int kExitIo = 4;
constexpr int kExitMismatch = 5;
constexpr int kExitInternal = 6;

cli::RunConfig load_config_with_overrides(const std::string& path,
                                          const std::vector<std::string>& sets) {
    cli::RunConfig cfg = cli::load_run_config(path);
    if (const char* env = std::getenv("EAST_SEED")) {
        cli::apply_key(cfg, "seed", env);
    }
    cli::apply_overrides(cfg, sets);
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << text;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_path,
                 const std::vector<std::string>& sets) {
    cli::RunConfig cfg = load_config_with_overrides(config_path, sets);
    const auto videos = video::generate_synthetic_dataset(cfg.data);
    video::write_dataset(videos, cfg.data.num_classes(), out_path);
    std::printf("wrote %zu videos (%d classes, %dx%dx%d frames) to %s\n",
                videos.size(), cfg.data.num_classes(), cfg.data.frames,
                cfg.data.height, cfg.data.width, out_path.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, const std::vector<std::string>& sets) {
    cli::RunConfig cfg = load_config_with_overrides(config_path, sets);
    video::DatasetHeader header;
    const auto data = video::read_dataset(data_path, &header);
    trainer::TrainRecipe recipe = cli::recipe_for(cfg, header);

    fs::create_directories(out_dir);
    const std::string echo = cli::serialize(cfg);
    write_text(fs::path(out_dir) / "config.echo.cfg", echo);

    trainer::Trainer tr(recipe);
    std::ofstream log(fs::path(out_dir) / "train_log.csv", std::ios::binary);
    if (!log) throw IoError(out_dir + ": cannot write train_log.csv");
    log << "step,lr,l_pred,l_oracle,l_l2,total\n";
    char line[256];
    for (int s = 0; s < recipe.opt.steps; ++s) {
        const double lr = tr.lr_at(s);
        const trainer::LossBreakdown lb = tr.step(data);
        if (cfg.log_every > 0 && (s % cfg.log_every == 0 || s + 1 == recipe.opt.steps)) {
            std::snprintf(line, sizeof line, "%d,%.8g,%.8g,%.8g,%.8g,%.8g\n", s, lr,
                          lb.l_pred, lb.l_oracle, lb.l_l2, lb.total);
            log << line;
        }
        if (cfg.checkpoint_every > 0 && (s + 1) % cfg.checkpoint_every == 0 &&
            s + 1 < recipe.opt.steps) {
            const std::string name = "checkpoint_step_" + std::to_string(s + 1) + ".east";
            model::save_checkpoint(tr.model(), recipe.mask, recipe.sampling, echo,
                                   (fs::path(out_dir) / name).string());
        }
        if ((s + 1) % 500 == 0)
            std::fprintf(stderr, "step %d/%d total=%.4f\n", s + 1, recipe.opt.steps,
                         lb.total);
    }
    model::save_checkpoint(tr.model(), recipe.mask, recipe.sampling, echo,
                           (fs::path(out_dir) / "checkpoint.east").string());
    std::printf("trained %d steps; checkpoint at %s\n", recipe.opt.steps,
                (fs::path(out_dir) / "checkpoint.east").string().c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& out_dir, const std::string& rho_grid_spec,
             const std::string& mask_override, double k_override, int threads,
             std::uint64_t mask_seed) {
    model::ModelBundle bundle = model::load_checkpoint(ckpt_path);
    video::DatasetHeader header;
    const auto data = video::read_dataset(data_path, &header);

    const model::ModelConfig& mc = bundle.model.config();
    if (int(header.height) != mc.height || int(header.width) != mc.width ||
        int(header.channels) != mc.channels)
        throw MismatchError("checkpoint geometry (" + std::to_string(mc.height) + "x" +
                            std::to_string(mc.width) + "x" + std::to_string(mc.channels) +
                            ") does not match dataset");
    if (int(header.num_classes) != mc.num_classes)
        throw MismatchError("checkpoint expects " + std::to_string(mc.num_classes) +
                            " classes, dataset has " + std::to_string(header.num_classes));

    std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    if (!rho_grid_spec.empty()) grid = cli::parse_rho_grid(rho_grid_spec);

    masker::MaskConfig mask = bundle.mask;
    if (!mask_override.empty()) {
        if (mask_override == "none") mask.kind = masker::MaskKind::kNone;
        else if (mask_override == "difference") mask.kind = masker::MaskKind::kDifference;
        else if (mask_override == "random") mask.kind = masker::MaskKind::kRandom;
        else throw ConfigError("unknown mask override: " + mask_override);
    }
    if (k_override >= 0.0) mask.masked_fraction = k_override;

    evaluator::MetricsTable table =
        evaluator::evaluate(evaluator::predictor_of(bundle.model), data, grid,
                            bundle.sampling, mask, threads, mask_seed);
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "config.echo.cfg", bundle.config_echo);
    evaluator::write_metrics_csv(table, (fs::path(out_dir) / "metrics.csv").string());
    for (const auto& row : table.rows)
        std::printf("rho=%.2f top1=%.4f n=%d\n", row.rho, row.top1, row.n);
    return 0;
}

int cmd_mask_viz(const std::string& data_path, int index, double k,
                 const std::string& out_path, int patch, int tubelet, double rho,
                 int frames) {
    const auto data = video::read_dataset(data_path);
    if (index < 0 || index >= int(data.size()))
        throw ContractError("video index out of range");
    sampler::SamplingConfig scfg;
    scfg.frames_per_half = frames;
    const video::Clip clip = sampler::build_inference_clip(data[std::size_t(index)].video,
                                                           rho, scfg);
    masker::MaskConfig mcfg;
    mcfg.patch = patch;
    mcfg.tubelet = tubelet;
    mcfg.masked_fraction = k;
    const masker::MaskSelection sel = masker::difference_mask(clip, mcfg);
    const masker::RankGrid ranks = masker::rank_tubelets(clip, mcfg);
    cli::write_mask_heatmap(out_path, clip, mcfg, sel, ranks);
    std::printf("wrote retention heatmap (%d kept per column of %d) to %s\n",
                sel.kept_per_column, sel.grid.t, out_path.c_str());
    return 0;
}

int cmd_flops(const std::string& config_path, double k, int clip_len, bool no_oracle,
              const std::vector<std::string>& sets) {
    cli::RunConfig cfg = load_config_with_overrides(config_path, sets);
    video::DatasetHeader header;
    header.frames = std::uint32_t(cfg.data.frames);
    header.height = std::uint32_t(cfg.data.height);
    header.width = std::uint32_t(cfg.data.width);
    header.channels = 1;
    header.num_classes = std::uint32_t(cfg.data.num_classes());
    const model::ModelConfig mc = cli::model_config_for(cfg, header);
    const int len = clip_len > 0 ? clip_len : cfg.sampling.frames_per_half;

    const evaluator::FlopReport rep = evaluator::count_flops(mc, k, len, !no_oracle);
    const evaluator::FlopReport base = evaluator::count_flops(mc, 0.0, len, !no_oracle);
    std::fputs(evaluator::format_flop_report(rep).c_str(), stdout);
    std::printf("peak_tokens_unmasked=%lld\n",
                static_cast<long long>(base.peak_tokens));
    std::printf("ratio_vs_unmasked=%.6g\n",
                rep.total_flops > 0 ? base.total_flops / rep.total_flops : 0.0);
    std::printf("peak_token_ratio=%.6g\n",
                rep.peak_tokens > 0 ? double(base.peak_tokens) / double(rep.peak_tokens)
                                    : 0.0);
    return 0;
}

int cmd_plot(const std::vector<std::string>& metrics_paths, const std::string& out_path,
             const std::string& title) {
    std::vector<cli::Series> series;
    for (const std::string& p : metrics_paths) {
        const evaluator::MetricsTable t = evaluator::read_metrics_csv(p);
        cli::Series s;
        s.label = fs::path(p).stem().string();
        for (const auto& row : t.rows) s.points.push_back({row.rho, row.top1});
        series.push_back(std::move(s));
    }
    cli::write_line_chart(out_path, title.empty() ? "top-1 accuracy" : title,
                          "observation ratio", "top-1 accuracy", series);
    std::printf("wrote %zu curves to %s\n", series.size(), out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "east: early action prediction on synthetic video\n"
        "Exit codes: 0 ok, 2 usage, 3 config error, 4 I/O error,\n"
        "            5 checkpoint/dataset mismatch, 6 numeric/contract failure"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, ckpt_path;
    std::vector<std::string> sets;
    std::string rho_grid_spec, mask_override, title;
    std::vector<std::string> metrics_paths;
    double k = 0.5;
    double k_override = -1.0;
    double rho = 1.0;
    int index = 0, patch = 4, tubelet = 2, frames = 8, clip_len = 0, threads = 0;
    std::uint64_t mask_seed = 0;
    bool no_oracle = false;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--config", config_path, "config file")->required();
    gen->add_option("--out", out_path, "output dataset path")->required();
    gen->add_option("--set", sets, "override config keys (key=value)");

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--data", data_path, "training dataset")->required();
    train->add_option("--out", out_path, "output directory")->required();
    train->add_option("--set", sets, "override config keys (key=value)");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint across ratios");
    eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    eval->add_option("--data", data_path, "evaluation dataset")->required();
    eval->add_option("--out", out_path, "output directory")->required();
    eval->add_option("--rho-grid", rho_grid_spec, "grid, e.g. 0.1:0.9:0.1");
    eval->add_option("--mask", mask_override, "mask override: none|difference|random");
    eval->add_option("--k", k_override, "masked fraction override");
    eval->add_option("--threads", threads, "worker threads (0 = auto)");
    eval->add_option("--mask-seed", mask_seed, "seed for random masking at eval");

    auto* viz = app.add_subcommand("mask-viz", "emit a per-frame retention heatmap");
    viz->add_option("--data", data_path, "dataset path")->required();
    viz->add_option("--index", index, "video index")->required();
    viz->add_option("--k", k, "masked fraction");
    viz->add_option("--out", out_path, "output SVG path")->required();
    viz->add_option("--p", patch, "spatial patch size");
    viz->add_option("--d", tubelet, "temporal tubelet size");
    viz->add_option("--rho", rho, "observation ratio for the clip");
    viz->add_option("--frames", frames, "frames per clip (T)");

    auto* flops = app.add_subcommand("flops", "analytic FLOP and token accounting");
    flops->add_option("--config", config_path, "config file")->required();
    flops->add_option("--k", k, "masked fraction");
    flops->add_option("--clip-len", clip_len, "clip length (default sample.frames_per_half)");
    flops->add_flag("--no-oracle", no_oracle, "exclude the oracle training pass");
    flops->add_option("--set", sets, "override config keys (key=value)");

    auto* plot = app.add_subcommand("plot", "render accuracy curves as SVG");
    plot->add_option("--metrics", metrics_paths, "metrics CSV files")->required();
    plot->add_option("--out", out_path, "output SVG path")->required();
    plot->add_option("--title", title, "chart title");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_path, sets);
        if (train->parsed()) return cmd_train(config_path, data_path, out_path, sets);
        if (eval->parsed())
            return cmd_eval(ckpt_path, data_path, out_path, rho_grid_spec, mask_override,
                            k_override, threads, mask_seed);
        if (viz->parsed())
            return cmd_mask_viz(data_path, index, k, out_path, patch, tubelet, rho, frames);
        if (flops->parsed())
            return cmd_flops(config_path, k, clip_len, no_oracle, sets);
        if (plot->parsed()) return cmd_plot(metrics_paths, out_path, title);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: config: %s\n", e.what());
        return kExitConfig;
    } catch (const MismatchError& e) {
        std::fprintf(stderr, "error: mismatch: %s\n", e.what());
        return kExitMismatch;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: io: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInternal;
    }
    return 2;
}
