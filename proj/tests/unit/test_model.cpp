#include <doctest.h>

#include <cmath>

#include "east/model.hpp"
#include "east/posenc.hpp"
#include "test_oracles.hpp"

using namespace east;
using namespace east::model;

namespace {

ModelConfig toy_cfg() {
    ModelConfig cfg;
    cfg.feat = 16;
    cfg.enc_layers = 2;
    cfg.enc_heads = 2;
    cfg.dec_variant = DecoderVariant::kDirect;
    cfg.dec_layers = 2;
    cfg.dec_heads = 2;
    cfg.patch = 4;
    cfg.tubelet = 2;
    cfg.frames_per_half = 8;
    cfg.height = 16;
    cfg.width = 16;
    cfg.channels = 1;
    cfg.num_classes = 9;
    return cfg;
}

masker::MaskConfig mask_for(const ModelConfig& cfg, double k) {
    masker::MaskConfig m;
    m.patch = cfg.patch;
    m.tubelet = cfg.tubelet;
    m.masked_fraction = k;
    return m;
}

EastModel make_model(const ModelConfig& cfg, std::uint64_t seed = 1) {
    EastModel model(cfg);
    Rng rng(seed);
    model.init_params(rng);
    return model;
}

// LayerNorm recomputed locally so the zero-residual test has its own
// reference.
std::vector<double> reference_ln_row(const double* x, int f) {
    double mu = 0.0;
    for (int j = 0; j < f; ++j) mu += x[j];
    mu /= f;
    double var = 0.0;
    for (int j = 0; j < f; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= f;
    std::vector<double> out(static_cast<std::size_t>(f));
    for (int j = 0; j < f; ++j) out[std::size_t(j)] = (x[j] - mu) / std::sqrt(var + 1e-5);
    return out;
}

}  // namespace

TEST_CASE("token counts follow N_t = T*H*W/(p^2*d)") {
    ModelConfig big;
    big.feat = 8;
    big.enc_heads = 2;
    big.dec_heads = 2;
    big.patch = 16;
    big.tubelet = 2;
    big.frames_per_half = 16;
    big.height = 224;
    big.width = 224;
    big.channels = 3;
    CHECK(big.tokens_per_clip(16) == 1568);

    ModelConfig cfg = toy_cfg();
    cfg.height = 32;
    cfg.width = 32;
    CHECK(cfg.tokens_per_clip(8) == 256);

    EastModel model = make_model(cfg);
    Rng rng(9);
    video::Clip clip = oracle::random_clip(8, 32, 32, 1, rng);
    TokenSequence full = model.tokenize(clip, masker::full_mask(clip, mask_for(cfg, 0)));
    CHECK(full.count() == 256);

    masker::MaskSelection sel = masker::difference_mask(clip, mask_for(cfg, 0.5));
    TokenSequence half = model.tokenize(clip, sel);
    CHECK(half.count() == 128);
    // retained positions are a subset of the unmasked run's positions
    std::size_t fi = 0;
    for (const TokenPos& p : half.positions) {
        while (fi < full.positions.size() &&
               (full.positions[fi].t != p.t || full.positions[fi].i != p.i ||
                full.positions[fi].j != p.j))
            ++fi;
        REQUIRE(fi < full.positions.size());
    }
}

TEST_CASE("apply_mask keeps positions and lexicographic order") {
    ModelConfig cfg = toy_cfg();
    cfg.height = 32;
    cfg.width = 32;
    EastModel model = make_model(cfg, 8);
    Rng rng(80);
    video::Clip clip = oracle::random_clip(8, 32, 32, 1, rng);
    masker::MaskConfig mc = mask_for(cfg, 0.5);
    TokenSequence full = model.tokenize(clip, masker::full_mask(clip, mc));
    REQUIRE(full.count() == 256);

    SUBCASE("k=0 selection is the identity") {
        TokenSequence out = apply_mask(full, masker::full_mask(clip, mc));
        CHECK(out.embeddings.v == full.embeddings.v);
        REQUIRE(out.positions.size() == full.positions.size());
    }
    SUBCASE("k=0.5 keeps 128 of 256 with their original tags") {
        masker::MaskSelection sel = masker::difference_mask(clip, mc);
        TokenSequence out = apply_mask(full, sel);
        CHECK(out.count() == 128);
        // equals tokenizing with the selection applied up front
        TokenSequence direct = model.tokenize(clip, sel);
        CHECK(out.embeddings.v == direct.embeddings.v);
        for (std::size_t n = 0; n < out.positions.size(); ++n) {
            CHECK(out.positions[n].t == direct.positions[n].t);
            CHECK(out.positions[n].i == direct.positions[n].i);
            CHECK(out.positions[n].j == direct.positions[n].j);
        }
        // scatter back by position tags: retained cells land at their
        // original grid coordinates
        for (int n = 0; n < out.count(); ++n) {
            const TokenPos& p = out.positions[std::size_t(n)];
            const int grid_row = (p.t * sel.grid.rows + p.i) * sel.grid.cols + p.j;
            CHECK(std::equal(out.embeddings.row(n), out.embeddings.row(n) + cfg.feat,
                             full.embeddings.row(grid_row)));
        }
    }
    SUBCASE("grid mismatch is a contract violation") {
        video::Clip small = oracle::random_clip(8, 16, 16, 1, rng);
        ModelConfig cfg16 = toy_cfg();
        EastModel m16 = make_model(cfg16, 9);
        masker::MaskConfig mc16 = mask_for(cfg16, 0.5);
        TokenSequence tiny = m16.tokenize(small, masker::full_mask(small, mc16));
        masker::MaskSelection sel = masker::difference_mask(clip, mc);
        CHECK_THROWS_AS(apply_mask(tiny, sel), ContractError);
    }
}

TEST_CASE("encode with zeroed output projections is the final LayerNorm") {
    ModelConfig cfg = toy_cfg();
    EastModel model = make_model(cfg);
    auto& ps = model.params();
    for (const auto& bp : model.encoder_params().blocks) {
        for (int idx : {bp.attn.wo, bp.attn.bo, bp.mlp.w2, bp.mlp.b2}) {
            const ParamInfo& info = ps.info(idx);
            std::fill(ps.p(idx), ps.p(idx) + info.size(), 0.0);
        }
    }
    Rng rng(21);
    video::Clip clip = oracle::random_clip(8, 16, 16, 1, rng);
    TokenSequence tokens = model.tokenize(clip, masker::full_mask(clip, mask_for(cfg, 0)));
    Mat out = model.encode(tokens);
    REQUIRE(out.rows == tokens.count());
    for (int r = 0; r < out.rows; ++r) {
        const auto ref = reference_ln_row(tokens.embeddings.row(r), cfg.feat);
        for (int j = 0; j < cfg.feat; ++j)
            CHECK(out.at(r, j) == doctest::Approx(ref[std::size_t(j)]).epsilon(1e-12));
    }
}

TEST_CASE("encode is permutation-equivariant over tokens") {
    ModelConfig cfg = toy_cfg();
    EastModel model = make_model(cfg, 3);
    Rng rng(22);
    video::Clip clip = oracle::random_clip(8, 16, 16, 1, rng);
    TokenSequence tokens = model.tokenize(clip, masker::full_mask(clip, mask_for(cfg, 0)));
    Mat out = model.encode(tokens);

    const int n = tokens.count();
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[std::size_t(i)] = (i * 37 + 11) % n;  // bijection
    TokenSequence shuffled;
    shuffled.embeddings = Mat(n, cfg.feat);
    shuffled.positions.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        const int src = perm[std::size_t(i)];
        std::copy(tokens.embeddings.row(src), tokens.embeddings.row(src) + cfg.feat,
                  shuffled.embeddings.row(i));
        shuffled.positions[std::size_t(i)] = tokens.positions[std::size_t(src)];
    }
    Mat out2 = model.encode(shuffled);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < cfg.feat; ++j)
            CHECK(out2.at(i, j) ==
                  doctest::Approx(out.at(perm[std::size_t(i)], j)).epsilon(1e-10));
}

TEST_CASE("pool_spatial means per time step with global fallback") {
    SUBCASE("constant rows per timestep pool to that constant") {
        const int f = 4;
        Mat feats(8, f);
        std::vector<TokenPos> pos;
        for (int t = 0; t < 4; ++t)
            for (int q = 0; q < 2; ++q) {
                for (int j = 0; j < f; ++j) feats.at(t * 2 + q, j) = double(t) + j;
                pos.push_back({t, q, 0});
            }
        Mat pooled = pool_spatial(feats, pos, 8, 2);
        REQUIRE(pooled.rows == 4);
        for (int t = 0; t < 4; ++t)
            for (int j = 0; j < f; ++j) CHECK(pooled.at(t, j) == double(t) + j);
    }
    SUBCASE("masked grid matches a brute-force grouping") {
        ModelConfig cfg = toy_cfg();
        EastModel model = make_model(cfg, 5);
        Rng rng(23);
        video::Clip clip = oracle::random_clip(8, 16, 16, 1, rng);
        masker::MaskSelection sel = masker::difference_mask(clip, mask_for(cfg, 0.5));
        TokenSequence tokens = model.tokenize(clip, sel);
        Mat enc = model.encode(tokens);
        Mat pooled = pool_spatial(enc, tokens.positions, 8, 2);
        for (int t = 0; t < 4; ++t) {
            std::vector<double> mean(std::size_t(cfg.feat), 0.0);
            int count = 0;
            for (int r = 0; r < enc.rows; ++r) {
                if (tokens.positions[std::size_t(r)].t != t) continue;
                ++count;
                for (int j = 0; j < cfg.feat; ++j) mean[std::size_t(j)] += enc.at(r, j);
            }
            REQUIRE(count > 0);
            for (int j = 0; j < cfg.feat; ++j)
                CHECK(pooled.at(t, j) ==
                      doctest::Approx(mean[std::size_t(j)] / count).epsilon(1e-12));
        }
    }
    SUBCASE("a timestep with no retained token takes the global mean") {
        Mat feats(2, 2);
        feats.at(0, 0) = 1.0;
        feats.at(0, 1) = 3.0;
        feats.at(1, 0) = 5.0;
        feats.at(1, 1) = 7.0;
        std::vector<TokenPos> pos = {{1, 0, 0}, {1, 1, 0}};  // timestep 0 empty
        Mat pooled = pool_spatial(feats, pos, 4, 2);
        REQUIRE(pooled.rows == 2);
        CHECK(pooled.at(0, 0) == 3.0);  // global mean of column 0
        CHECK(pooled.at(0, 1) == 5.0);
        CHECK(pooled.at(1, 0) == 3.0);
        CHECK(pooled.at(1, 1) == 5.0);
    }
}

TEST_CASE("decoder variants") {
    ModelConfig cfg = toy_cfg();
    Rng rng(31);
    Mat present(4, cfg.feat);
    for (auto& v : present.v) v = rng.normal();

    SUBCASE("identity returns its input") {
        cfg.dec_variant = DecoderVariant::kIdentity;
        EastModel model = make_model(cfg);
        Mat fhat = model.decode(present);
        CHECK(fhat.v == present.v);
    }
    SUBCASE("direct emits one forecast per mask slot") {
        EastModel model = make_model(cfg);
        Mat fhat = model.decode(present);
        CHECK(fhat.rows == 4);
        CHECK(fhat.cols == cfg.feat);
    }
    SUBCASE("wrong present length is a contract violation") {
        EastModel model = make_model(cfg);
        Mat bad(3, cfg.feat);
        CHECK_THROWS_AS(model.decode(bad), ContractError);
    }
}

TEST_CASE("causal stack: outputs before a perturbed position never move") {
    ModelConfig cfg = toy_cfg();
    cfg.dec_variant = DecoderVariant::kAutoregressive;
    EastModel model = make_model(cfg, 77);
    Rng rng(41);
    Mat x(6, cfg.feat);
    for (auto& v : x.v) v = rng.normal();
    Mat base = run_stack(model.params(), model.decoder_params(), x, true, nullptr);
    for (int q = 0; q < x.rows; ++q) {
        Mat xp = x;
        xp.at(q, 3) += 1e-3;
        Mat out = run_stack(model.params(), model.decoder_params(), xp, true, nullptr);
        for (int i = 0; i < x.rows; ++i) {
            double delta = 0.0;
            for (int j = 0; j < cfg.feat; ++j)
                delta = std::max(delta, std::abs(out.at(i, j) - base.at(i, j)));
            if (i < q) {
                CHECK(delta == 0.0);  // exactly untouched by causal masking
            } else if (i == q) {
                CHECK(delta > 0.0);
            }
        }
    }
}

TEST_CASE("autoregressive rollout equals an independent replay and is causal") {
    ModelConfig cfg = toy_cfg();
    cfg.dec_variant = DecoderVariant::kAutoregressive;
    EastModel model = make_model(cfg, 13);
    Rng rng(42);
    const int p = 4;
    Mat present(p, cfg.feat);
    for (auto& v : present.v) v = rng.normal();
    Mat fhat = model.decode(present);

    // replay the rollout from public pieces, optionally nudging one fed-back
    // token to observe what downstream steps it reaches
    auto replay = [&](int inject_step, double delta) {
        Mat out(p, cfg.feat);
        std::vector<double> pe(static_cast<std::size_t>(cfg.feat));
        for (int s = 0; s < p; ++s) {
            Mat input(p + s, cfg.feat);
            for (int r = 0; r < p; ++r)
                std::copy(present.row(r), present.row(r) + cfg.feat, input.row(r));
            for (int q = 0; q < s; ++q) {
                temporal_posenc(p + q, cfg.feat, pe.data());
                for (int j = 0; j < cfg.feat; ++j) {
                    double fed = out.at(q, j) + pe[std::size_t(j)];
                    if (q == inject_step && j == 0) fed += delta;
                    input.at(p + q, j) = fed;
                }
            }
            Mat o = run_stack(model.params(), model.decoder_params(), input, true,
                              nullptr);
            std::copy(o.row(p + s - 1), o.row(p + s - 1) + cfg.feat, out.row(s));
        }
        return out;
    };

    Mat replayed = replay(-1, 0.0);
    for (std::size_t i = 0; i < fhat.v.size(); ++i)
        CHECK(replayed.v[i] == doctest::Approx(fhat.v[i]).epsilon(1e-12));

    // perturbing fed-back token s leaves forecasts 0..s untouched and
    // (generically) moves a later one
    for (int s = 0; s < p - 1; ++s) {
        Mat poked = replay(s, 1e-3);
        for (int q = 0; q <= s; ++q)
            for (int j = 0; j < cfg.feat; ++j)
                CHECK(poked.at(q, j) == replayed.at(q, j));
        double later = 0.0;
        for (int q = s + 1; q < p; ++q)
            for (int j = 0; j < cfg.feat; ++j)
                later = std::max(later, std::abs(poked.at(q, j) - replayed.at(q, j)));
        CHECK(later > 0.0);
    }

    // every present token reaches every forecast step under full rollout
    for (int j0 : {0, 3}) {
        Mat nudged = present;
        nudged.at(j0, 1) += 1e-3;
        Mat out = model.decode(nudged);
        for (int s = 0; s < p; ++s) {
            double delta = 0.0;
            for (int j = 0; j < cfg.feat; ++j)
                delta = std::max(delta, std::abs(out.at(s, j) - fhat.at(s, j)));
            CHECK(delta > 0.0);
        }
    }
}

TEST_CASE("classify applies temporal mean pooling then one affine map") {
    ModelConfig cfg = toy_cfg();
    EastModel model = make_model(cfg, 50);
    // give the zero-initialized head something to do
    Rng wrng(51);
    {
        auto& ps = model.params();
        const int wi = model.head_weight_index(Head::kPred);
        for (std::size_t q = 0; q < ps.info(wi).size(); ++q) ps.p(wi)[q] = wrng.normal();
    }
    SUBCASE("constant rows v give affine(v)") {
        Mat pooled(4, cfg.feat);
        std::vector<double> v(static_cast<std::size_t>(cfg.feat));
        Rng rng(52);
        for (int j = 0; j < cfg.feat; ++j) v[std::size_t(j)] = rng.normal();
        for (int r = 0; r < 4; ++r)
            std::copy(v.begin(), v.end(), pooled.row(r));
        Logits got = model.classify(pooled, Head::kPred);
        Mat single(1, cfg.feat);
        std::copy(v.begin(), v.end(), single.row(0));
        Logits expect = model.classify(single, Head::kPred);
        REQUIRE(got.size() == 9);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
        for (double s : got) CHECK(std::isfinite(s));
    }
    SUBCASE("shared mode produces identical logits on both heads") {
        Mat pooled(2, cfg.feat);
        Rng rng(53);
        for (auto& x : pooled.v) x = rng.normal();
        Logits a = model.classify(pooled, Head::kPred);
        Logits b = model.classify(pooled, Head::kOracle);
        CHECK(a == b);
        CHECK(model.heads_share_parameters());
        CHECK(model.params().p(model.head_weight_index(Head::kPred)) ==
              model.params().p(model.head_weight_index(Head::kOracle)));
    }
    SUBCASE("separate mode registers distinct parameters") {
        ModelConfig cfg2 = toy_cfg();
        cfg2.classifier = ClassifierMode::kSeparate;
        EastModel m2 = make_model(cfg2);
        CHECK_FALSE(m2.heads_share_parameters());
        CHECK(m2.params().p(m2.head_weight_index(Head::kPred)) !=
              m2.params().p(m2.head_weight_index(Head::kOracle)));
    }
}

TEST_CASE("forward passes compose as specified") {
    ModelConfig cfg = toy_cfg();
    cfg.dec_variant = DecoderVariant::kIdentity;
    EastModel model = make_model(cfg, 60);
    Rng rng(61);
    video::Clip obs = oracle::random_clip(8, 16, 16, 1, rng);
    video::Clip unobs = oracle::random_clip(8, 16, 16, 1, rng);
    masker::MaskConfig mc = mask_for(cfg, 0.5);
    masker::MaskSelection so = masker::difference_mask(obs, mc);
    masker::MaskSelection su = masker::difference_mask(unobs, mc);

    SUBCASE("identity decoder: pred path is classify(pool(encode(tokenize)))") {
        Logits via_forward = model.forward_pred(obs, so);
        TokenSequence tokens = model.tokenize(obs, so);
        Mat enc = model.encode(tokens);
        Mat pooled = pool_spatial(enc, tokens.positions, 8, 2);
        Logits direct = model.classify(pooled, Head::kPred);
        REQUIRE(via_forward.size() == direct.size());
        for (std::size_t i = 0; i < direct.size(); ++i)
            CHECK(via_forward[i] == doctest::Approx(direct[i]).epsilon(1e-12));
    }
    SUBCASE("oracle pooled length is 2T/d and bypasses the decoder") {
        OracleCache cache;
        model.forward_oracle(obs, so, unobs, su, &cache);
        CHECK(cache.pooled.rows == 8);  // 2*8/2
        CHECK(cache.tokens.count() == 64);  // two masked halves of 32
    }
}
