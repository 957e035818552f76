#include "east/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace east::sampler {

void SamplingConfig::validate() const {
    if (frames_per_half < 1) throw ConfigError("T must be at least 1");
    if (mode == SamplingMode::kRandomized) {
        if (rho_grid.empty()) throw ConfigError("rho grid must be nonempty");
        for (double r : rho_grid)
            if (r <= 0.0 || r >= 1.0)
                throw ConfigError("training rho values must lie in (0, 1)");
    } else {
        if (fixed_rho <= 0.0 || fixed_rho > 1.0)
            throw ConfigError("fixed rho must lie in (0, 1]");
    }
}

int boundary_index(int total_frames, double rho) {
    if (rho <= 0.0 || rho > 1.0) throw ContractError("rho must lie in (0, 1]");
    const int m = int(std::floor(rho * total_frames + 1e-9));
    return std::max(m, 1);
}

std::vector<int> index_present(int total_frames, double rho, int frames_per_half) {
    if (total_frames < 1) throw ContractError("video must have frames");
    const int m = boundary_index(total_frames, rho);
    std::vector<int> idx(static_cast<std::size_t>(frames_per_half));
    for (int j = 0; j < frames_per_half; ++j) {
        // ceil((j+1)*m / T) - 1, in exact integer arithmetic
        idx[std::size_t(j)] =
            int((std::int64_t(j + 1) * m + frames_per_half - 1) / frames_per_half) - 1;
    }
    return idx;
}

std::vector<int> index_future(int total_frames, double rho, int frames_per_half) {
    const int m = boundary_index(total_frames, rho);
    if (m >= total_frames)
        throw ContractError("no unobserved frames at rho=" + std::to_string(rho) +
                            "; rho=1 is valid only for inference");
    std::vector<int> idx(static_cast<std::size_t>(frames_per_half));
    for (int j = 0; j < frames_per_half; ++j) {
        idx[std::size_t(j)] =
            m + int(std::int64_t(j) * (total_frames - m) / frames_per_half);
    }
    return idx;
}

namespace {

video::Clip gather(const video::VideoTensor& v, const std::vector<int>& indices,
                   video::GuardedFrames* guard) {
    video::Clip clip(int(indices.size()), v.height, v.width, v.channels);
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const std::uint8_t* src =
            guard ? guard->frame(indices[j]) : v.frame(indices[j]);
        std::memcpy(clip.frame(int(j)), src, clip.frame_bytes());
    }
    return clip;
}

}  // namespace

ClipPair build_clip_pair(const video::VideoTensor& v, double rho,
                         const SamplingConfig& cfg) {
    ClipPair pair;
    pair.rho.value = rho;
    pair.observed_indices = index_present(v.frames, rho, cfg.frames_per_half);
    pair.unobserved_indices = index_future(v.frames, rho, cfg.frames_per_half);
    pair.observed = gather(v, pair.observed_indices, nullptr);
    pair.unobserved = gather(v, pair.unobserved_indices, nullptr);
    return pair;
}

video::Clip build_inference_clip(const video::VideoTensor& v, double rho,
                                 const SamplingConfig& cfg,
                                 video::GuardedFrames* guard) {
    const auto indices = index_present(v.frames, rho, cfg.frames_per_half);
    return gather(v, indices, guard);
}

double sample_rho(const SamplingConfig& cfg, Rng& rng) {
    if (cfg.mode == SamplingMode::kFixed) return cfg.fixed_rho;
    return cfg.rho_grid[rng.uniform(cfg.rho_grid.size())];
}

}  // namespace east::sampler
