#include <doctest.h>

#include <map>

#include "east/sampler.hpp"
#include "test_oracles.hpp"

using namespace east;
using namespace east::sampler;

TEST_CASE("index_present pins the stated spacings") {
    CHECK(index_present(16, 0.5, 8) == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(index_present(40, 0.5, 8) == std::vector<int>{2, 4, 7, 9, 12, 14, 17, 19});
    CHECK(index_present(20, 0.1, 8) == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1});
}

TEST_CASE("index_future pins the stated spacings") {
    CHECK(index_future(16, 0.5, 8) == std::vector<int>{8, 9, 10, 11, 12, 13, 14, 15});
    CHECK(index_future(40, 0.5, 8) == std::vector<int>{20, 22, 25, 27, 30, 32, 35, 37});
    const auto idx = index_future(18, 0.5, 8);
    CHECK(idx.front() == 9);
    CHECK(idx.back() <= 17);
    CHECK_THROWS_AS(index_future(16, 1.0, 8), ContractError);
}

TEST_CASE("clip pair adjacency and monotonicity hold for random draws") {
    Rng rng(17);
    for (int rep = 0; rep < 1000; ++rep) {
        const int total = 2 * int(2 + rng.uniform(40));  // 4..82 frames
        const double rho = 0.05 + 0.9 * rng.uniform_real();
        const int t = 1 + int(rng.uniform(12));
        const int m = boundary_index(total, rho);
        if (m >= total) continue;
        const auto present = index_present(total, rho, t);
        const auto future = index_future(total, rho, t);
        REQUIRE(int(present.size()) == t);
        REQUIRE(int(future.size()) == t);
        CHECK(present.back() == m - 1);
        CHECK(future.front() == m);
        CHECK(present.back() + 1 == future.front());
        for (std::size_t j = 1; j < present.size(); ++j) {
            CHECK(present[j] >= present[j - 1]);
            CHECK(present[j] < m);
        }
        for (std::size_t j = 1; j < future.size(); ++j) {
            CHECK(future[j] >= future[j - 1]);
            CHECK(future[j] < total);
        }
    }
}

TEST_CASE("build_clip_pair gathers the indexed frames") {
    SamplingConfig cfg;
    SUBCASE("constant black video stays black") {
        video::VideoTensor v(16, 8, 8, 1);
        ClipPair pair = build_clip_pair(v, 0.5, cfg);
        for (auto px : pair.observed.pixels) CHECK(px == 0);
        for (auto px : pair.unobserved.pixels) CHECK(px == 0);
    }
    SUBCASE("frame t filled with value t splits into 0..7 and 8..15") {
        video::VideoTensor v(16, 8, 8, 1);
        for (int t = 0; t < 16; ++t)
            std::fill(v.frame(t), v.frame(t) + v.frame_bytes(), std::uint8_t(t));
        ClipPair pair = build_clip_pair(v, 0.5, cfg);
        for (int t = 0; t < 8; ++t) {
            CHECK(pair.observed.at(t, 3, 3, 0) == t);
            CHECK(pair.unobserved.at(t, 3, 3, 0) == 8 + t);
        }
        CHECK(pair.rho.value == 0.5);
    }
}

TEST_CASE("build_inference_clip equals the observed half and reads only the prefix") {
    SamplingConfig cfg;
    Rng rng(31);
    SUBCASE("rho=1 spans the whole video evenly") {
        video::VideoTensor v(16, 8, 8, 1);
        for (int t = 0; t < 16; ++t)
            std::fill(v.frame(t), v.frame(t) + v.frame_bytes(), std::uint8_t(t));
        video::Clip clip = build_inference_clip(v, 1.0, cfg);
        CHECK(clip.at(0, 0, 0, 0) == 1);  // ceil(16/8)-1
        CHECK(clip.at(7, 0, 0, 0) == 15);
    }
    SUBCASE("equals build_clip_pair().observed on random cases") {
        for (int rep = 0; rep < 100; ++rep) {
            const int total = 2 * int(4 + rng.uniform(20));
            video::VideoTensor v = oracle::random_clip(total, 8, 8, 1, rng);
            const double rho = 0.1 + 0.8 * rng.uniform_real();
            if (boundary_index(total, rho) >= total) continue;
            ClipPair pair = build_clip_pair(v, rho, cfg);
            video::Clip inf = build_inference_clip(v, rho, cfg);
            REQUIRE(inf.pixels == pair.observed.pixels);
        }
    }
    SUBCASE("the frame guard sees no read past the boundary") {
        video::VideoTensor v = oracle::random_clip(20, 8, 8, 1, rng);
        for (double rho : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const int limit = boundary_index(20, rho);
            video::GuardedFrames guard(v, limit);
            build_inference_clip(v, rho, cfg, &guard);
            CHECK(guard.violations() == 0);
            CHECK(guard.max_index_read() == limit - 1);
        }
    }
    SUBCASE("guard records reads past an artificially low limit") {
        video::VideoTensor v = oracle::random_clip(20, 8, 8, 1, rng);
        video::GuardedFrames guard(v, 1);
        build_inference_clip(v, 0.9, cfg, &guard);
        CHECK(guard.violations() > 0);
    }
}

TEST_CASE("sample_rho follows the grid or the fixed pin") {
    SUBCASE("default grid values only") {
        SamplingConfig cfg;
        Rng rng(3);
        for (int rep = 0; rep < 500; ++rep) {
            const double r = sample_rho(cfg, rng);
            bool in_grid = false;
            for (double g : cfg.rho_grid) in_grid = in_grid || r == g;
            CHECK(in_grid);
        }
    }
    SUBCASE("singleton grid is constant") {
        SamplingConfig cfg;
        cfg.rho_grid = {0.5};
        Rng rng(4);
        for (int rep = 0; rep < 50; ++rep) CHECK(sample_rho(cfg, rng) == 0.5);
    }
    SUBCASE("9000 draws spread evenly across the grid") {
        SamplingConfig cfg;
        Rng rng(5);
        std::map<double, int> counts;
        for (int rep = 0; rep < 9000; ++rep) ++counts[sample_rho(cfg, rng)];
        REQUIRE(counts.size() == 9);
        for (const auto& [r, n] : counts) {
            CHECK(n >= 900);
            CHECK(n <= 1100);
        }
    }
    SUBCASE("fixed mode returns the pinned value") {
        SamplingConfig cfg;
        cfg.mode = SamplingMode::kFixed;
        cfg.fixed_rho = 0.3;
        Rng rng(6);
        CHECK(sample_rho(cfg, rng) == 0.3);
    }
}
