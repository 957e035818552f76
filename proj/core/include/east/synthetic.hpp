#pragma once

#include <cstdint>
#include <vector>

#include "east/video.hpp"

namespace east::video {

// Two-phase-motion dataset: a bright square moves with velocity v[d1] until
// the phase boundary and with velocity v[d2] afterwards. Frames before the
// boundary carry no information about d2, which gives the task an exact
// accuracy ceiling per observation ratio (bayes_ceiling below).
struct SyntheticConfig {
    int n1 = 3;                   // phase-1 direction count
    int n2 = 3;                   // phase-2 direction count
    int frames = 20;              // T_d
    int height = 24;
    int width = 24;
    int sprite_size = 4;
    double noise_std = 2.0;
    double phase_boundary = 0.5;  // fraction of T_d
    int videos_per_class = 100;
    std::uint64_t seed = 1;

    int num_classes() const { return n1 * n2; }
    int boundary_frame() const;   // first frame displaced by the phase-2 velocity
    void validate() const;
};

struct Velocity {
    int dx = 0;
    int dy = 0;
};

// Fixed direction table the d1/d2 indices select from. All components are
// nonnegative so the worst-case trajectory sweep is monotone and the
// in-frame check stays simple.
Velocity direction(int index);

// Deterministic render of a single video; exposed so tests can pin
// trajectories and the prefix-independence property directly.
VideoTensor render_video(const SyntheticConfig& cfg, int d1, int d2, int start_x,
                         int start_y, std::uint64_t noise_seed);

// Valid start rectangle [0, max_x] x [0, max_y] so the sprite stays in
// frame for every (d1, d2) combination. Throws ConfigError when empty.
void start_margin(const SyntheticConfig& cfg, int& max_x, int& max_y);

std::vector<LabeledVideo> generate_synthetic_dataset(const SyntheticConfig& cfg);

// Best achievable top-1 accuracy from the first rho*T_d frames. rho at or
// below the boundary exposes only phase-1 motion: d1 is identifiable, d2 is
// uniform-unseen, so the ceiling is 1/n2. Past the boundary the full class
// is identifiable.
double bayes_ceiling(double rho, const SyntheticConfig& cfg);

}  // namespace east::video
