#pragma once

#include <vector>

#include "east/rng.hpp"
#include "east/video.hpp"

namespace east::sampler {

struct ObservationRatio {
    double value = 0.5;
};

enum class SamplingMode { kRandomized, kFixed };

struct SamplingConfig {
    int frames_per_half = 8;  // T
    SamplingMode mode = SamplingMode::kRandomized;
    double fixed_rho = 1.0;   // used when mode == kFixed
    std::vector<double> rho_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

    void validate() const;
};

// Observed half V^o, unobserved half V^u, and the source frame indices that
// produced them. The last observed index and the first unobserved index are
// adjacent frames of the original video.
struct ClipPair {
    video::Clip observed;
    video::Clip unobserved;
    std::vector<int> observed_indices;
    std::vector<int> unobserved_indices;
    ObservationRatio rho;
};

// First unobserved frame index: ⌊rho*T_d⌋, clamped to at least 1 so a
// present clip always exists. The 1e-9 nudge keeps grid ratios like 0.3
// behaving as exact tenths.
int boundary_index(int total_frames, double rho);

// T evenly spaced indices covering [0, m); last index is exactly m-1.
// Frames repeat when m < T.
std::vector<int> index_present(int total_frames, double rho, int frames_per_half);

// T evenly spaced indices covering [m, T_d); first index is exactly m.
// Throws ContractError when no future frame exists (rho = 1 in training).
std::vector<int> index_future(int total_frames, double rho, int frames_per_half);

ClipPair build_clip_pair(const video::VideoTensor& v, double rho,
                         const SamplingConfig& cfg);

// Prefix-only clip for inference; equals the observed half of
// build_clip_pair. All frame reads go through the guard when one is given,
// which is how evaluation proves it never touched the future.
video::Clip build_inference_clip(const video::VideoTensor& v, double rho,
                                 const SamplingConfig& cfg,
                                 video::GuardedFrames* guard = nullptr);

// Training-time ratio draw: uniform over the grid, or the pinned value in
// fixed mode.
double sample_rho(const SamplingConfig& cfg, Rng& rng);

}  // namespace east::sampler
