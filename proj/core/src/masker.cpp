#include "east/masker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace east::masker {

void MaskConfig::validate(int frames, int height, int width) const {
    if (patch < 1 || tubelet < 1) throw ConfigError("patch and tubelet must be positive");
    if (height % patch != 0 || width % patch != 0)
        throw ConfigError("patch size must divide clip height and width");
    if (frames % tubelet != 0)
        throw ConfigError("tubelet size must divide clip length");
    if (masked_fraction < 0.0 || masked_fraction >= 1.0)
        throw ConfigError("masked fraction k must lie in [0, 1)");
}

int MaskConfig::kept_per_column(int frames) const {
    const int per_column = frames / tubelet;
    // round-half-up of (1-k) * T/d
    return int(std::floor((1.0 - masked_fraction) * per_column + 0.5));
}

TubeletGrid grid_of(const video::Clip& clip, const MaskConfig& cfg) {
    cfg.validate(clip.frames, clip.height, clip.width);
    return {clip.frames / cfg.tubelet, clip.height / cfg.patch, clip.width / cfg.patch};
}

std::vector<std::uint8_t> tubelet_pixels(const video::Clip& clip,
                                         const MaskConfig& cfg, int t, int i, int j) {
    std::vector<std::uint8_t> out;
    out.reserve(std::size_t(cfg.tubelet) * cfg.patch * cfg.patch * clip.channels);
    for (int f = t * cfg.tubelet; f < (t + 1) * cfg.tubelet; ++f)
        for (int y = i * cfg.patch; y < (i + 1) * cfg.patch; ++y)
            for (int x = j * cfg.patch; x < (j + 1) * cfg.patch; ++x)
                for (int c = 0; c < clip.channels; ++c) out.push_back(clip.at(f, y, x, c));
    return out;
}

TubeletGridData extract_tubelets(const video::Clip& clip, const MaskConfig& cfg) {
    TubeletGridData out;
    out.grid = grid_of(clip, cfg);
    out.values_per_tubelet = cfg.tubelet * cfg.patch * cfg.patch * clip.channels;
    out.data.reserve(std::size_t(out.grid.cells()) * out.values_per_tubelet);
    for (int t = 0; t < out.grid.t; ++t)
        for (int i = 0; i < out.grid.rows; ++i)
            for (int j = 0; j < out.grid.cols; ++j) {
                const auto px = tubelet_pixels(clip, cfg, t, i, j);
                out.data.insert(out.data.end(), px.begin(), px.end());
            }
    return out;
}

namespace {

// L1 distance over the p x p x C patch at (i, j) between two frames.
std::int64_t patch_l1(const video::Clip& clip, const MaskConfig& cfg, int frame_a,
                      int frame_b, int i, int j) {
    std::int64_t acc = 0;
    for (int y = i * cfg.patch; y < (i + 1) * cfg.patch; ++y)
        for (int x = j * cfg.patch; x < (j + 1) * cfg.patch; ++x)
            for (int c = 0; c < clip.channels; ++c)
                acc += std::abs(int(clip.at(frame_a, y, x, c)) -
                                int(clip.at(frame_b, y, x, c)));
    return acc;
}

}  // namespace

RankGrid rank_tubelets(const video::Clip& clip, const MaskConfig& cfg) {
    RankGrid rg;
    rg.grid = grid_of(clip, cfg);
    rg.r.assign(std::size_t(rg.grid.cells()), 0.0);
    const int d = cfg.tubelet;
    for (int t = 0; t < rg.grid.t; ++t) {
        // First slice of tubelet t vs last slice of tubelet t+1; the final
        // tubelet compares its own first and last slices.
        const int frame_a = t * d;
        const int frame_b =
            (t < rg.grid.t - 1) ? (t + 1) * d + d - 1 : t * d + d - 1;
        for (int i = 0; i < rg.grid.rows; ++i)
            for (int j = 0; j < rg.grid.cols; ++j)
                rg.r[(std::size_t(t) * rg.grid.rows + i) * rg.grid.cols + j] =
                    double(patch_l1(clip, cfg, frame_a, frame_b, i, j));
    }
    return rg;
}

namespace {

MaskSelection empty_selection(const TubeletGrid& grid, int kept) {
    MaskSelection sel;
    sel.grid = grid;
    sel.keep.assign(std::size_t(grid.cells()), 0);
    sel.kept_per_column = kept;
    return sel;
}

}  // namespace

MaskSelection difference_mask(const video::Clip& clip, const MaskConfig& cfg) {
    const RankGrid rg = rank_tubelets(clip, cfg);
    const int kept = cfg.kept_per_column(clip.frames);
    MaskSelection sel = empty_selection(rg.grid, kept);

    std::vector<int> order(static_cast<std::size_t>(rg.grid.t));
    for (int i = 0; i < rg.grid.rows; ++i) {
        for (int j = 0; j < rg.grid.cols; ++j) {
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double ra = rg.at(a, i, j);
                const double rb = rg.at(b, i, j);
                if (ra != rb) return ra > rb;
                return a > b;  // equal ranks: prefer the later tubelet
            });
            for (int n = 0; n < kept; ++n) sel.set(order[std::size_t(n)], i, j, true);
        }
    }
    return sel;
}

MaskSelection random_mask(const video::Clip& clip, const MaskConfig& cfg, Rng& rng) {
    const TubeletGrid grid = grid_of(clip, cfg);
    const int kept = cfg.kept_per_column(clip.frames);
    MaskSelection sel = empty_selection(grid, kept);

    std::vector<int> order(static_cast<std::size_t>(grid.t));
    for (int i = 0; i < grid.rows; ++i) {
        for (int j = 0; j < grid.cols; ++j) {
            std::iota(order.begin(), order.end(), 0);
            // Fisher-Yates; the first `kept` entries are a uniform subset.
            for (int n = grid.t - 1; n > 0; --n)
                std::swap(order[std::size_t(n)],
                          order[std::size_t(rng.uniform(std::uint64_t(n) + 1))]);
            for (int n = 0; n < kept; ++n) sel.set(order[std::size_t(n)], i, j, true);
        }
    }
    return sel;
}

MaskSelection full_mask(const video::Clip& clip, const MaskConfig& cfg) {
    const TubeletGrid grid = grid_of(clip, cfg);
    MaskSelection sel;
    sel.grid = grid;
    sel.keep.assign(std::size_t(grid.cells()), 1);
    sel.kept_per_column = grid.t;
    return sel;
}

MaskSelection make_mask(const video::Clip& clip, const MaskConfig& cfg, Rng& rng) {
    switch (cfg.kind) {
        case MaskKind::kDifference: return difference_mask(clip, cfg);
        case MaskKind::kRandom: return random_mask(clip, cfg, rng);
        case MaskKind::kNone: return full_mask(clip, cfg);
    }
    throw ConfigError("unknown mask kind");
}

}  // namespace east::masker
