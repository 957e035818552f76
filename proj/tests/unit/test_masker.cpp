#include <doctest.h>

#include <set>

#include "east/masker.hpp"
#include "test_oracles.hpp"

using namespace east;
using namespace east::masker;

namespace {

MaskConfig cfg_for(int p, int d, double k) {
    MaskConfig c;
    c.patch = p;
    c.tubelet = d;
    c.masked_fraction = k;
    return c;
}

}  // namespace

TEST_CASE("extract_tubelets partitions the clip") {
    Rng rng(11);
    SUBCASE("single cell holds everything") {
        video::Clip clip = oracle::random_clip(2, 16, 16, 1, rng);
        MaskConfig c = cfg_for(16, 2, 0.5);
        TubeletGrid g = grid_of(clip, c);
        CHECK(g.t == 1);
        CHECK(g.rows == 1);
        CHECK(g.cols == 1);
        auto px = tubelet_pixels(clip, c, 0, 0, 0);
        CHECK(px.size() == 512);
        CHECK(std::vector<std::uint8_t>(clip.pixels) == px);
    }
    SUBCASE("4x8x8 grid of 96-value tubelets") {
        video::Clip clip = oracle::random_clip(8, 32, 32, 3, rng);
        MaskConfig c = cfg_for(4, 2, 0.5);
        TubeletGrid g = grid_of(clip, c);
        CHECK(g.t == 4);
        CHECK(g.rows == 8);
        CHECK(g.cols == 8);
        CHECK(tubelet_pixels(clip, c, 1, 3, 5).size() == 96);
    }
    SUBCASE("whole-grid extraction matches the per-cell view") {
        video::Clip clip = oracle::random_clip(8, 32, 32, 3, rng);
        MaskConfig c = cfg_for(4, 2, 0.5);
        TubeletGridData grid = extract_tubelets(clip, c);
        CHECK(grid.grid.t == 4);
        CHECK(grid.values_per_tubelet == 96);
        CHECK(grid.data.size() == std::size_t(grid.grid.cells()) * 96);
        auto one = tubelet_pixels(clip, c, 2, 5, 7);
        CHECK(std::equal(one.begin(), one.end(), grid.cell(2, 5, 7)));
    }
    SUBCASE("reassembly reproduces the clip") {
        video::Clip clip = oracle::random_clip(8, 32, 32, 3, rng);
        MaskConfig c = cfg_for(4, 2, 0.5);
        TubeletGrid g = grid_of(clip, c);
        video::Clip rebuilt(clip.frames, clip.height, clip.width, clip.channels);
        for (int t = 0; t < g.t; ++t)
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) {
                    auto px = tubelet_pixels(clip, c, t, i, j);
                    std::size_t q = 0;
                    for (int f = t * c.tubelet; f < (t + 1) * c.tubelet; ++f)
                        for (int y = i * c.patch; y < (i + 1) * c.patch; ++y)
                            for (int x = j * c.patch; x < (j + 1) * c.patch; ++x)
                                for (int ch = 0; ch < clip.channels; ++ch)
                                    rebuilt.at(f, y, x, ch) = px[q++];
                }
        CHECK(rebuilt.pixels == clip.pixels);
    }
    SUBCASE("divisibility violations are configuration errors") {
        video::Clip clip = oracle::random_clip(8, 30, 32, 1, rng);
        CHECK_THROWS_AS(grid_of(clip, cfg_for(4, 2, 0.5)), ConfigError);
        video::Clip clip2 = oracle::random_clip(7, 32, 32, 1, rng);
        CHECK_THROWS_AS(grid_of(clip2, cfg_for(4, 2, 0.5)), ConfigError);
    }
}

TEST_CASE("rank_tubelets matches the pixel-difference definition") {
    SUBCASE("constant clip ranks zero") {
        video::Clip clip(8, 16, 16, 1);
        std::fill(clip.pixels.begin(), clip.pixels.end(), std::uint8_t(77));
        RankGrid r = rank_tubelets(clip, cfg_for(4, 2, 0.5));
        for (double v : r.r) CHECK(v == 0.0);
    }
    SUBCASE("single bright pixel in frame 3 ranks tubelet 0 of its column") {
        video::Clip clip(8, 16, 16, 1);
        clip.at(3, 5, 9, 0) = 5;  // frame 3 = last slice of tubelet 1
        MaskConfig c = cfg_for(4, 2, 0.5);
        RankGrid r = rank_tubelets(clip, c);
        const int i = 5 / 4, j = 9 / 4;
        CHECK(r.at(0, i, j) == 5.0);  // frame 0 vs frame 3
        auto brute = oracle::brute_rank(clip, c.patch, c.tubelet);
        for (int t = 0; t < r.grid.t; ++t)
            CHECK(r.at(t, i, j) ==
                  brute[(std::size_t(t) * r.grid.rows + i) * r.grid.cols + j]);
    }
    SUBCASE("random clips agree with the brute-force loop") {
        Rng rng(202);
        for (int rep = 0; rep < 100; ++rep) {
            video::Clip clip = oracle::random_clip(8, 16, 16, 1, rng);
            MaskConfig c = cfg_for(4, 2, 0.5);
            RankGrid r = rank_tubelets(clip, c);
            auto brute = oracle::brute_rank(clip, c.patch, c.tubelet);
            REQUIRE(r.r == brute);
        }
    }
}

TEST_CASE("difference_mask keeps the top-ranked tubelets per column") {
    SUBCASE("k=0.5 keeps exactly half per column") {
        Rng rng(7);
        video::Clip clip = oracle::random_clip(8, 32, 32, 1, rng);
        MaskSelection sel = difference_mask(clip, cfg_for(4, 2, 0.5));
        CHECK(sel.kept_per_column == 2);
        for (int i = 0; i < sel.grid.rows; ++i)
            for (int j = 0; j < sel.grid.cols; ++j) {
                int kept = 0;
                for (int t = 0; t < sel.grid.t; ++t) kept += sel.at(t, i, j) ? 1 : 0;
                CHECK(kept == 2);
            }
    }
    SUBCASE("constant clip: tie-break keeps the latest tubelets") {
        video::Clip clip(8, 16, 16, 1);
        std::fill(clip.pixels.begin(), clip.pixels.end(), std::uint8_t(42));
        MaskSelection sel = difference_mask(clip, cfg_for(4, 2, 0.5));
        for (int i = 0; i < sel.grid.rows; ++i)
            for (int j = 0; j < sel.grid.cols; ++j) {
                CHECK_FALSE(sel.at(0, i, j));
                CHECK_FALSE(sel.at(1, i, j));
                CHECK(sel.at(2, i, j));
                CHECK(sel.at(3, i, j));
            }
    }
    SUBCASE("random clips equal the brute-force selection") {
        Rng rng(303);
        for (int rep = 0; rep < 100; ++rep) {
            video::Clip clip = oracle::random_clip(8, 16, 16, 1, rng);
            for (double k : {0.25, 0.5, 0.75}) {
                MaskSelection sel = difference_mask(clip, cfg_for(4, 2, k));
                auto brute = oracle::brute_select(clip, 4, 2, k);
                REQUIRE(sel.keep == brute);
            }
        }
    }
    SUBCASE("masking is independent of the other half") {
        Rng rng(404);
        video::Clip observed = oracle::random_clip(8, 16, 16, 1, rng);
        video::Clip other = oracle::random_clip(8, 16, 16, 1, rng);
        MaskSelection before = difference_mask(observed, cfg_for(4, 2, 0.5));
        for (auto& px : other.pixels) px = std::uint8_t(255 - px);  // corrupt it
        MaskSelection after = difference_mask(observed, cfg_for(4, 2, 0.5));
        CHECK(before.keep == after.keep);
    }
}

TEST_CASE("random_mask draws uniform per-column subsets") {
    Rng rng(55);
    video::Clip clip = oracle::random_clip(8, 16, 16, 1, rng);
    SUBCASE("k=0 keeps everything") {
        Rng mrng(1);
        MaskSelection sel = random_mask(clip, cfg_for(4, 2, 0.0), mrng);
        for (auto k : sel.keep) CHECK(k == 1);
    }
    SUBCASE("per-column count is always the quota") {
        Rng mrng(2);
        MaskSelection sel = random_mask(clip, cfg_for(4, 2, 0.5), mrng);
        for (int i = 0; i < sel.grid.rows; ++i)
            for (int j = 0; j < sel.grid.cols; ++j) {
                int kept = 0;
                for (int t = 0; t < sel.grid.t; ++t) kept += sel.at(t, i, j) ? 1 : 0;
                CHECK(kept == 2);
            }
    }
    SUBCASE("each index retained with frequency 1/2 over many columns") {
        Rng mrng(3);
        std::vector<long> hits(4, 0);
        long columns = 0;
        for (int rep = 0; rep < 700; ++rep) {
            MaskSelection sel = random_mask(clip, cfg_for(4, 2, 0.5), mrng);
            for (int i = 0; i < sel.grid.rows; ++i)
                for (int j = 0; j < sel.grid.cols; ++j) {
                    ++columns;
                    for (int t = 0; t < 4; ++t) hits[std::size_t(t)] += sel.at(t, i, j);
                }
        }
        REQUIRE(columns >= 10000);
        for (int t = 0; t < 4; ++t) {
            const double freq = double(hits[std::size_t(t)]) / double(columns);
            CHECK(freq == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +- 0.02
        }
    }
    SUBCASE("deterministic given the rng state") {
        Rng a(99), b(99);
        MaskSelection s1 = random_mask(clip, cfg_for(4, 2, 0.5), a);
        MaskSelection s2 = random_mask(clip, cfg_for(4, 2, 0.5), b);
        CHECK(s1.keep == s2.keep);
    }
}
