#pragma once

#include <vector>

#include "east/rng.hpp"
#include "east/video.hpp"

namespace east::masker {

enum class MaskKind { kDifference, kRandom, kNone };

struct MaskConfig {
    int patch = 4;        // p, spatial tubelet size
    int tubelet = 2;      // d, temporal tubelet size
    double masked_fraction = 0.5;  // k
    MaskKind kind = MaskKind::kDifference;

    void validate(int frames, int height, int width) const;
    // round-half-up, so odd T/d columns still get a deterministic count
    int kept_per_column(int frames) const;
};

// Grid dimensions of a tokenized clip: (T/d) x (H/p) x (W/p).
struct TubeletGrid {
    int t = 0;
    int rows = 0;
    int cols = 0;
    int cells() const { return t * rows * cols; }
};

TubeletGrid grid_of(const video::Clip& clip, const MaskConfig& cfg);

// Flattened pixels of tubelet (t, i, j), in (frame, row, col, channel) order.
// Tubelets partition the clip losslessly.
std::vector<std::uint8_t> tubelet_pixels(const video::Clip& clip,
                                         const MaskConfig& cfg, int t, int i, int j);

// Whole-clip extraction: every tubelet vectorized, (t, i, j) lexicographic.
struct TubeletGridData {
    TubeletGrid grid;
    int values_per_tubelet = 0;
    std::vector<std::uint8_t> data;  // cells() x values_per_tubelet

    const std::uint8_t* cell(int t, int i, int j) const {
        return data.data() +
               std::size_t((std::size_t(t) * grid.rows + i) * grid.cols + j) *
                   values_per_tubelet;
    }
};

TubeletGridData extract_tubelets(const video::Clip& clip, const MaskConfig& cfg);

// Motion rank r_{t,i,j}: L1 pixel distance between the first frame-slice of
// tubelet t and the last frame-slice of tubelet t+1, on raw 8-bit values.
// The temporally last tubelet, which has no successor, is ranked by its own
// first-vs-last slice distance.
struct RankGrid {
    TubeletGrid grid;
    std::vector<double> r;  // t-major, row-major

    double at(int t, int i, int j) const {
        return r[(std::size_t(t) * grid.rows + i) * grid.cols + j];
    }
};

RankGrid rank_tubelets(const video::Clip& clip, const MaskConfig& cfg);

// Per-(t,i,j) retention decisions. Every spatial column keeps the same
// number of tubelets, so masking with k removes the same token count from
// each spatial position.
struct MaskSelection {
    TubeletGrid grid;
    std::vector<std::uint8_t> keep;  // t-major, row-major booleans
    int kept_per_column = 0;

    bool at(int t, int i, int j) const {
        return keep[(std::size_t(t) * grid.rows + i) * grid.cols + j] != 0;
    }
    void set(int t, int i, int j, bool v) {
        keep[(std::size_t(t) * grid.rows + i) * grid.cols + j] = v ? 1 : 0;
    }
    int total_kept() const { return kept_per_column * grid.rows * grid.cols; }
};

// Keep the highest-ranking tubelets per spatial column; ties prefer the
// larger temporal index (recent motion wins).
MaskSelection difference_mask(const video::Clip& clip, const MaskConfig& cfg);

// Uniformly random per-column subset of the same size.
MaskSelection random_mask(const video::Clip& clip, const MaskConfig& cfg, Rng& rng);

// Keep-everything selection, used for MaskKind::kNone and k = 0.
MaskSelection full_mask(const video::Clip& clip, const MaskConfig& cfg);

// Dispatch on cfg.kind.
MaskSelection make_mask(const video::Clip& clip, const MaskConfig& cfg, Rng& rng);

}  // namespace east::masker
