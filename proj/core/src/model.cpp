#include "east/model.hpp"

#include <algorithm>
#include <cmath>

#include "east/posenc.hpp"

namespace east::model {

const char* to_string(DecoderVariant v) {
    switch (v) {
        case DecoderVariant::kIdentity: return "identity";
        case DecoderVariant::kDirect: return "direct";
        case DecoderVariant::kAutoregressive: return "autoregressive";
    }
    return "?";
}

const char* to_string(ClassifierMode m) {
    return m == ClassifierMode::kShared ? "shared" : "separate";
}

DecoderVariant decoder_variant_from_string(const std::string& s) {
    if (s == "identity") return DecoderVariant::kIdentity;
    if (s == "direct") return DecoderVariant::kDirect;
    if (s == "autoregressive") return DecoderVariant::kAutoregressive;
    throw ConfigError("unknown decoder variant: " + s);
}

ClassifierMode classifier_mode_from_string(const std::string& s) {
    if (s == "shared") return ClassifierMode::kShared;
    if (s == "separate") return ClassifierMode::kSeparate;
    throw ConfigError("unknown classifier mode: " + s);
}

void ModelConfig::validate() const {
    if (feat < 2 || feat % 2 != 0) throw ConfigError("feature width must be even");
    if (enc_layers < 1 || enc_heads < 1) throw ConfigError("encoder shape invalid");
    if (feat % enc_heads != 0) throw ConfigError("feat must divide by enc_heads");
    if (dec_variant != DecoderVariant::kIdentity) {
        if (dec_layers < 1) throw ConfigError("decoder needs at least one layer");
        if (dec_heads < 1 || feat % dec_heads != 0)
            throw ConfigError("feat must divide by dec_heads");
    }
    if (patch < 1 || tubelet < 1) throw ConfigError("tubelet geometry invalid");
    if (height % patch != 0 || width % patch != 0)
        throw ConfigError("patch size must divide height and width");
    if (frames_per_half % tubelet != 0)
        throw ConfigError("tubelet size must divide clip length");
    if (frames_per_half / tubelet < 1) throw ConfigError("need at least one time step");
    if (num_classes < 1) throw ConfigError("num_classes must be positive");
    if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be positive");
}

// ---------------------------------------------------------------------------
// Primitive layers
// ---------------------------------------------------------------------------

namespace {

constexpr double kLnEps = 1e-5;

// y = x * W + b, W row-major (x.cols x dout)
void linear_forward(const Mat& x, const double* w, const double* b, int dout, Mat& y) {
    y.rows = x.rows;
    y.cols = dout;
    y.v.assign(std::size_t(x.rows) * dout, 0.0);
    for (int i = 0; i < x.rows; ++i) {
        const double* xr = x.row(i);
        double* yr = y.row(i);
        if (b)
            for (int j = 0; j < dout; ++j) yr[j] = b[j];
        for (int k = 0; k < x.cols; ++k) {
            const double xik = xr[k];
            const double* wr = w + std::size_t(k) * dout;
            for (int j = 0; j < dout; ++j) yr[j] += xik * wr[j];
        }
    }
}

// Accumulates dW += x^T dy, db += colsum dy, dx += dy W^T.
void linear_backward(const Mat& x, const double* w, int dout, const Mat& dy,
                     Mat* dx_acc, double* dw, double* db) {
    if (dw) matmul_tn_acc(x, dy, dw);
    if (db)
        for (int i = 0; i < dy.rows; ++i) {
            const double* r = dy.row(i);
            for (int j = 0; j < dout; ++j) db[j] += r[j];
        }
    if (dx_acc) {
        for (int i = 0; i < dy.rows; ++i) {
            const double* dyr = dy.row(i);
            double* dxr = dx_acc->row(i);
            for (int k = 0; k < x.cols; ++k) {
                const double* wr = w + std::size_t(k) * dout;
                double s = 0.0;
                for (int j = 0; j < dout; ++j) s += dyr[j] * wr[j];
                dxr[k] += s;
            }
        }
    }
}

void ln_forward(const Mat& x, const double* g, const double* b, Mat& y, LnCache& c) {
    const int n = x.rows, f = x.cols;
    y.rows = n;
    y.cols = f;
    y.v.resize(std::size_t(n) * f);
    c.xhat.rows = n;
    c.xhat.cols = f;
    c.xhat.v.resize(std::size_t(n) * f);
    c.rstd.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        const double* xr = x.row(i);
        double mu = 0.0;
        for (int j = 0; j < f; ++j) mu += xr[j];
        mu /= f;
        double var = 0.0;
        for (int j = 0; j < f; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= f;
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        c.rstd[std::size_t(i)] = rstd;
        double* hr = c.xhat.row(i);
        double* yr = y.row(i);
        for (int j = 0; j < f; ++j) {
            hr[j] = (xr[j] - mu) * rstd;
            yr[j] = g[j] * hr[j] + b[j];
        }
    }
}

// dx_acc += dLN; dg/db accumulate.
void ln_backward(const LnCache& c, const double* g, const Mat& dy, Mat* dx_acc,
                 double* dg, double* db) {
    const int n = c.xhat.rows, f = c.xhat.cols;
    std::vector<double> dxhat(static_cast<std::size_t>(f));
    for (int i = 0; i < n; ++i) {
        const double* dyr = dy.row(i);
        const double* hr = c.xhat.row(i);
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < f; ++j) {
            dxhat[std::size_t(j)] = dyr[j] * g[j];
            m1 += dxhat[std::size_t(j)];
            m2 += dxhat[std::size_t(j)] * hr[j];
            if (dg) dg[j] += dyr[j] * hr[j];
            if (db) db[j] += dyr[j];
        }
        m1 /= f;
        m2 /= f;
        const double rstd = c.rstd[std::size_t(i)];
        double* dxr = dx_acc->row(i);
        for (int j = 0; j < f; ++j)
            dxr[j] += rstd * (dxhat[std::size_t(j)] - m1 - hr[j] * m2);
    }
}

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z * 0.7071067811865475244)); }

double gelu_grad(double z) {
    const double phi = std::exp(-0.5 * z * z) * 0.3989422804014326779;
    return 0.5 * (1.0 + std::erf(z * 0.7071067811865475244)) + z * phi;
}

void copy_cols(const Mat& src, int c0, int w, Mat& dst) {
    dst.rows = src.rows;
    dst.cols = w;
    dst.v.resize(std::size_t(src.rows) * w);
    for (int i = 0; i < src.rows; ++i) {
        const double* s = src.row(i) + c0;
        double* d = dst.row(i);
        for (int j = 0; j < w; ++j) d[j] = s[j];
    }
}

void add_cols(Mat& dst, int c0, const Mat& src) {
    for (int i = 0; i < src.rows; ++i) {
        double* d = dst.row(i) + c0;
        const double* s = src.row(i);
        for (int j = 0; j < src.cols; ++j) d[j] += s[j];
    }
}

void attn_forward(const ParameterStore& ps, const AttnParams& ap, const Mat& xn,
                  int heads, bool causal, Mat& out, AttnCache& c) {
    const int n = xn.rows, f = xn.cols;
    const int dh = f / heads;
    const double scale = 1.0 / std::sqrt(double(dh));
    c.xn = xn;
    linear_forward(xn, ps.p(ap.wq), ps.p(ap.bq), f, c.q);
    linear_forward(xn, ps.p(ap.wk), ps.p(ap.bk), f, c.k);
    linear_forward(xn, ps.p(ap.wv), ps.p(ap.bv), f, c.v);
    c.concat = Mat(n, f);
    c.probs.assign(std::size_t(heads), Mat());
    Mat qh, kh, vh, s, oh;
    for (int h = 0; h < heads; ++h) {
        copy_cols(c.q, h * dh, dh, qh);
        copy_cols(c.k, h * dh, dh, kh);
        copy_cols(c.v, h * dh, dh, vh);
        matmul_nt(qh, kh, s);
        for (int i = 0; i < n; ++i) {
            double* sr = s.row(i);
            const int lim = causal ? i : n - 1;
            double mx = -1e300;
            for (int j = 0; j < n; ++j) {
                sr[j] *= scale;
                if (causal && j > lim) sr[j] = -1e30;
                mx = std::max(mx, sr[j]);
            }
            double z = 0.0;
            for (int j = 0; j < n; ++j) {
                sr[j] = std::exp(sr[j] - mx);
                z += sr[j];
            }
            for (int j = 0; j < n; ++j) sr[j] /= z;
        }
        c.probs[std::size_t(h)] = s;
        matmul(s, vh, oh);
        add_cols(c.concat, h * dh, oh);
    }
    linear_forward(c.concat, ps.p(ap.wo), ps.p(ap.bo), f, out);
}

void attn_backward(const ParameterStore& ps, const AttnParams& ap, const AttnCache& c,
                   int heads, const Mat& dy, Mat& dxn_acc, GradBuffer& grad) {
    const int n = c.xn.rows, f = c.xn.cols;
    const int dh = f / heads;
    const double scale = 1.0 / std::sqrt(double(dh));
    auto g = [&](int idx) { return grad.data() + ps.info(idx).offset; };

    Mat dconcat(n, f);
    linear_backward(c.concat, ps.p(ap.wo), f, dy, &dconcat, g(ap.wo), g(ap.bo));

    Mat dq(n, f), dk(n, f), dv(n, f);
    Mat qh, kh, vh, doh, dp, ds, tmp;
    for (int h = 0; h < heads; ++h) {
        copy_cols(c.q, h * dh, dh, qh);
        copy_cols(c.k, h * dh, dh, kh);
        copy_cols(c.v, h * dh, dh, vh);
        copy_cols(dconcat, h * dh, dh, doh);
        const Mat& p = c.probs[std::size_t(h)];
        matmul_nt(doh, vh, dp);  // dP = dOh Vh^T
        // dVh = P^T dOh
        tmp = Mat(n, dh);
        matmul_tn_acc(p, doh, tmp.v.data());
        add_cols(dv, h * dh, tmp);
        // softmax backward, then the attention scale
        ds.rows = n;
        ds.cols = n;
        ds.v.assign(std::size_t(n) * n, 0.0);
        for (int i = 0; i < n; ++i) {
            const double* pr = p.row(i);
            const double* dpr = dp.row(i);
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += pr[j] * dpr[j];
            double* dsr = ds.row(i);
            for (int j = 0; j < n; ++j) dsr[j] = pr[j] * (dpr[j] - dot) * scale;
        }
        matmul(ds, kh, tmp);  // dQh = dS Kh
        add_cols(dq, h * dh, tmp);
        tmp = Mat(n, dh);     // dKh = dS^T Qh
        matmul_tn_acc(ds, qh, tmp.v.data());
        add_cols(dk, h * dh, tmp);
    }
    linear_backward(c.xn, ps.p(ap.wq), f, dq, &dxn_acc, g(ap.wq), g(ap.bq));
    linear_backward(c.xn, ps.p(ap.wk), f, dk, &dxn_acc, g(ap.wk), g(ap.bk));
    linear_backward(c.xn, ps.p(ap.wv), f, dv, &dxn_acc, g(ap.wv), g(ap.bv));
}

void mlp_forward(const ParameterStore& ps, const MlpParams& mp, const Mat& xn,
                 Mat& out, MlpCache& c) {
    c.xn = xn;
    const int fm = ps.info(mp.w1).cols;
    linear_forward(xn, ps.p(mp.w1), ps.p(mp.b1), fm, c.z);
    c.a = c.z;
    for (auto& v : c.a.v) v = gelu(v);
    linear_forward(c.a, ps.p(mp.w2), ps.p(mp.b2), xn.cols, out);
}

void mlp_backward(const ParameterStore& ps, const MlpParams& mp, const MlpCache& c,
                  const Mat& dy, Mat& dxn_acc, GradBuffer& grad) {
    auto g = [&](int idx) { return grad.data() + ps.info(idx).offset; };
    const int fm = c.z.cols;
    Mat da(c.z.rows, fm);
    linear_backward(c.a, ps.p(mp.w2), dy.cols, dy, &da, g(mp.w2), g(mp.b2));
    for (std::size_t i = 0; i < da.v.size(); ++i) da.v[i] *= gelu_grad(c.z.v[i]);
    linear_backward(c.xn, ps.p(mp.w1), fm, da, &dxn_acc, g(mp.w1), g(mp.b1));
}

}  // namespace

Mat run_stack(const ParameterStore& ps, const StackParams& sp, const Mat& x,
              bool causal, StackCache* cache) {
    StackCache local;
    StackCache& c = cache ? *cache : local;
    c.blocks.assign(sp.blocks.size(), BlockCache());
    Mat cur = x;
    Mat branch;
    for (std::size_t l = 0; l < sp.blocks.size(); ++l) {
        const BlockParams& bp = sp.blocks[l];
        BlockCache& bc = c.blocks[l];
        bc.x_in = cur;
        Mat xn;
        ln_forward(cur, ps.p(bp.ln1.g), ps.p(bp.ln1.b), xn, bc.ln1);
        attn_forward(ps, bp.attn, xn, sp.heads, causal, branch, bc.attn);
        for (std::size_t i = 0; i < cur.v.size(); ++i) cur.v[i] += branch.v[i];
        bc.x_mid = cur;
        ln_forward(cur, ps.p(bp.ln2.g), ps.p(bp.ln2.b), xn, bc.ln2);
        mlp_forward(ps, bp.mlp, xn, branch, bc.mlp);
        for (std::size_t i = 0; i < cur.v.size(); ++i) cur.v[i] += branch.v[i];
    }
    c.pre_final = cur;
    Mat out;
    ln_forward(cur, ps.p(sp.final_ln.g), ps.p(sp.final_ln.b), out, c.final_ln);
    return out;
}

void stack_backward(const ParameterStore& ps, const StackParams& sp,
                    const StackCache& cache, const Mat& dout, Mat& dx,
                    GradBuffer& grad, bool /*causal*/) {
    auto g = [&](int idx) { return grad.data() + ps.info(idx).offset; };
    Mat cur(dout.rows, dout.cols);
    ln_backward(cache.final_ln, ps.p(sp.final_ln.g), dout, &cur, g(sp.final_ln.g),
                g(sp.final_ln.b));
    for (std::size_t li = sp.blocks.size(); li-- > 0;) {
        const BlockParams& bp = sp.blocks[li];
        const BlockCache& bc = cache.blocks[li];
        // x2 = x1 + MLP(LN2(x1))
        Mat dxn(cur.rows, cur.cols);
        mlp_backward(ps, bp.mlp, bc.mlp, cur, dxn, grad);
        ln_backward(bc.ln2, ps.p(bp.ln2.g), dxn, &cur, g(bp.ln2.g), g(bp.ln2.b));
        // x1 = x0 + Attn(LN1(x0))
        dxn = Mat(cur.rows, cur.cols);
        attn_backward(ps, bp.attn, bc.attn, sp.heads, cur, dxn, grad);
        ln_backward(bc.ln1, ps.p(bp.ln1.g), dxn, &cur, g(bp.ln1.g), g(bp.ln1.b));
    }
    dx = cur;
}

// ---------------------------------------------------------------------------
// ParameterStore
// ---------------------------------------------------------------------------

int ParameterStore::add(std::string name, int rows, int cols, bool decay,
                        InitKind init) {
    ParamInfo info;
    info.name = std::move(name);
    info.offset = data_.size();
    info.rows = rows;
    info.cols = cols;
    info.decay = decay;
    info.init = init;
    infos_.push_back(info);
    data_.resize(data_.size() + info.size(), 0.0);
    return int(infos_.size()) - 1;
}

void ParameterStore::init_params(Rng& rng) {
    for (const ParamInfo& info : infos_) {
        double* p = data_.data() + info.offset;
        switch (info.init) {
            case InitKind::kZero:
                std::fill(p, p + info.size(), 0.0);
                break;
            case InitKind::kOne:
                std::fill(p, p + info.size(), 1.0);
                break;
            case InitKind::kTruncNormal:
                for (std::size_t i = 0; i < info.size(); ++i) p[i] = rng.trunc_normal(0.02);
                break;
        }
    }
}

int ParameterStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < infos_.size(); ++i)
        if (infos_[i].name == name) return int(i);
    return -1;
}

// ---------------------------------------------------------------------------
// Token selection and pooling
// ---------------------------------------------------------------------------

TokenSequence apply_mask(const TokenSequence& tokens,
                         const masker::MaskSelection& sel) {
    const int f = tokens.embeddings.cols;
    // The sequence must cover the selection grid exactly, in grid order.
    if (tokens.count() != sel.grid.cells())
        throw ContractError("token sequence does not cover the selection grid");
    TokenSequence out;
    int kept = 0;
    for (auto k : sel.keep) kept += k ? 1 : 0;
    out.embeddings = Mat(kept, f);
    out.positions.reserve(std::size_t(kept));
    int row = 0;
    for (int n = 0; n < tokens.count(); ++n) {
        const TokenPos& p = tokens.positions[std::size_t(n)];
        if (p.t < 0 || p.t >= sel.grid.t || p.i < 0 || p.i >= sel.grid.rows ||
            p.j < 0 || p.j >= sel.grid.cols)
            throw ContractError("token position outside the selection grid");
        if (!sel.at(p.t, p.i, p.j)) continue;
        std::copy(tokens.embeddings.row(n), tokens.embeddings.row(n) + f,
                  out.embeddings.row(row));
        out.positions.push_back(p);
        ++row;
    }
    return out;
}

Mat pool_spatial(const Mat& features, const std::vector<TokenPos>& positions,
                 int clip_len, int tubelet, PoolCache* cache) {
    if (features.rows != int(positions.size()))
        throw ContractError("features and positions disagree");
    const int steps = clip_len / tubelet;
    const int f = features.cols;
    Mat out(steps, f);
    std::vector<int> counts(std::size_t(steps), 0);
    for (std::size_t n = 0; n < positions.size(); ++n) {
        const int t = positions[n].t;
        if (t < 0 || t >= steps) throw ContractError("token time step out of range");
        ++counts[std::size_t(t)];
        const double* src = features.row(int(n));
        double* dst = out.row(t);
        for (int j = 0; j < f; ++j) dst[j] += src[j];
    }
    std::vector<double> global(std::size_t(f), 0.0);
    bool any_empty = false;
    for (int t = 0; t < steps; ++t) any_empty = any_empty || counts[std::size_t(t)] == 0;
    if (any_empty && features.rows > 0) {
        for (int n = 0; n < features.rows; ++n) {
            const double* src = features.row(n);
            for (int j = 0; j < f; ++j) global[std::size_t(j)] += src[j];
        }
        for (int j = 0; j < f; ++j) global[std::size_t(j)] /= features.rows;
    }
    for (int t = 0; t < steps; ++t) {
        double* dst = out.row(t);
        if (counts[std::size_t(t)] > 0) {
            for (int j = 0; j < f; ++j) dst[j] /= counts[std::size_t(t)];
        } else {
            for (int j = 0; j < f; ++j) dst[j] = global[std::size_t(j)];
        }
    }
    if (cache) {
        cache->step_of_token.resize(positions.size());
        for (std::size_t n = 0; n < positions.size(); ++n)
            cache->step_of_token[n] = positions[n].t;
        cache->counts = counts;
        cache->steps = steps;
    }
    return out;
}

void pool_spatial_backward(const PoolCache& cache, const Mat& dout, Mat& dfeat) {
    const int f = dout.cols;
    const int n_tokens = int(cache.step_of_token.size());
    for (std::size_t n = 0; n < cache.step_of_token.size(); ++n) {
        const int t = cache.step_of_token[n];
        const double* src = dout.row(t);
        double* dst = dfeat.row(int(n));
        const double inv = 1.0 / cache.counts[std::size_t(t)];
        for (int j = 0; j < f; ++j) dst[j] += src[j] * inv;
    }
    // Empty steps spread their gradient through the global-mean fallback.
    for (int t = 0; t < cache.steps; ++t) {
        if (cache.counts[std::size_t(t)] != 0 || n_tokens == 0) continue;
        const double* src = dout.row(t);
        const double inv = 1.0 / n_tokens;
        for (int n = 0; n < n_tokens; ++n) {
            double* dst = dfeat.row(n);
            for (int j = 0; j < f; ++j) dst[j] += src[j] * inv;
        }
    }
}

// ---------------------------------------------------------------------------
// EastModel
// ---------------------------------------------------------------------------

EastModel::EastModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    embed_w_ = ps_.add("embed.w", cfg_.token_dim(), cfg_.feat, true, InitKind::kTruncNormal);
    embed_b_ = ps_.add("embed.b", 1, cfg_.feat, false, InitKind::kZero);
    enc_ = build_stack("enc", cfg_.enc_layers, cfg_.enc_heads);
    if (cfg_.dec_variant != DecoderVariant::kIdentity) {
        dec_ = build_stack("dec", cfg_.dec_layers, cfg_.dec_heads);
        if (cfg_.dec_variant == DecoderVariant::kDirect)
            mask_token_ = ps_.add("dec.mask_token", 1, cfg_.feat, false, InitKind::kZero);
    }
    head_w_ = ps_.add("head.w", cfg_.feat, cfg_.num_classes, true, InitKind::kZero);
    head_b_ = ps_.add("head.b", 1, cfg_.num_classes, false, InitKind::kZero);
    if (cfg_.classifier == ClassifierMode::kSeparate) {
        head2_w_ = ps_.add("head_oracle.w", cfg_.feat, cfg_.num_classes, true, InitKind::kZero);
        head2_b_ = ps_.add("head_oracle.b", 1, cfg_.num_classes, false, InitKind::kZero);
    }
}

StackParams EastModel::build_stack(const std::string& prefix, int layers, int heads) {
    StackParams sp;
    sp.heads = heads;
    const int f = cfg_.feat;
    const int fm = cfg_.mlp_ratio * f;
    for (int l = 0; l < layers; ++l) {
        const std::string base = prefix + ".block" + std::to_string(l) + ".";
        BlockParams bp;
        bp.ln1.g = ps_.add(base + "ln1.g", 1, f, false, InitKind::kOne);
        bp.ln1.b = ps_.add(base + "ln1.b", 1, f, false, InitKind::kZero);
        bp.attn.wq = ps_.add(base + "attn.wq", f, f, true, InitKind::kTruncNormal);
        bp.attn.bq = ps_.add(base + "attn.bq", 1, f, false, InitKind::kZero);
        bp.attn.wk = ps_.add(base + "attn.wk", f, f, true, InitKind::kTruncNormal);
        bp.attn.bk = ps_.add(base + "attn.bk", 1, f, false, InitKind::kZero);
        bp.attn.wv = ps_.add(base + "attn.wv", f, f, true, InitKind::kTruncNormal);
        bp.attn.bv = ps_.add(base + "attn.bv", 1, f, false, InitKind::kZero);
        bp.attn.wo = ps_.add(base + "attn.wo", f, f, true, InitKind::kTruncNormal);
        bp.attn.bo = ps_.add(base + "attn.bo", 1, f, false, InitKind::kZero);
        bp.ln2.g = ps_.add(base + "ln2.g", 1, f, false, InitKind::kOne);
        bp.ln2.b = ps_.add(base + "ln2.b", 1, f, false, InitKind::kZero);
        bp.mlp.w1 = ps_.add(base + "mlp.w1", f, fm, true, InitKind::kTruncNormal);
        bp.mlp.b1 = ps_.add(base + "mlp.b1", 1, fm, false, InitKind::kZero);
        bp.mlp.w2 = ps_.add(base + "mlp.w2", fm, f, true, InitKind::kTruncNormal);
        bp.mlp.b2 = ps_.add(base + "mlp.b2", 1, f, false, InitKind::kZero);
        sp.blocks.push_back(bp);
    }
    sp.final_ln.g = ps_.add(prefix + ".ln_f.g", 1, f, false, InitKind::kOne);
    sp.final_ln.b = ps_.add(prefix + ".ln_f.b", 1, f, false, InitKind::kZero);
    return sp;
}

TokenSequence EastModel::tokenize(const video::Clip& clip,
                                  const masker::MaskSelection& sel, int time_offset,
                                  Mat* x0_out) const {
    if (clip.height != cfg_.height || clip.width != cfg_.width ||
        clip.channels != cfg_.channels)
        throw ConfigError("clip geometry does not match the model");
    if (clip.frames % cfg_.tubelet != 0)
        throw ConfigError("clip length not divisible by tubelet size");
    const int steps = clip.frames / cfg_.tubelet;
    const int rows = cfg_.height / cfg_.patch;
    const int cols = cfg_.width / cfg_.patch;
    if (sel.grid.t != steps || sel.grid.rows != rows || sel.grid.cols != cols)
        throw ContractError("mask selection grid does not match the clip");

    masker::MaskConfig mc;
    mc.patch = cfg_.patch;
    mc.tubelet = cfg_.tubelet;

    TokenSequence seq;
    const int n = [&] {
        int c = 0;
        for (auto k : sel.keep) c += k ? 1 : 0;
        return c;
    }();
    const int din = cfg_.token_dim();
    Mat x0(n, din);
    seq.positions.reserve(std::size_t(n));
    int row = 0;
    for (int t = 0; t < steps; ++t) {
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) {
                if (!sel.at(t, i, j)) continue;
                const auto px = masker::tubelet_pixels(clip, mc, t, i, j);
                double* dst = x0.row(row);
                for (int q = 0; q < din; ++q) dst[q] = double(px[std::size_t(q)]) / 127.5 - 1.0;
                seq.positions.push_back({t + time_offset, i, j});
                ++row;
            }
        }
    }
    linear_forward(x0, ps_.p(embed_w_), ps_.p(embed_b_), cfg_.feat, seq.embeddings);
    std::vector<double> pe(static_cast<std::size_t>(cfg_.feat));
    for (int r = 0; r < n; ++r) {
        const TokenPos& p = seq.positions[std::size_t(r)];
        spatio_temporal_posenc(p.t, p.i, p.j, cfg_.feat, pe.data());
        double* dst = seq.embeddings.row(r);
        for (int q = 0; q < cfg_.feat; ++q) dst[q] += pe[std::size_t(q)];
    }
    if (x0_out) *x0_out = std::move(x0);
    return seq;
}

Mat EastModel::encode(const TokenSequence& tokens, StackCache* cache) const {
    return run_stack(ps_, enc_, tokens.embeddings, /*causal=*/false, cache);
}

Mat EastModel::decode(const Mat& present, DecodeCache* cache) const {
    const int p = cfg_.frames_per_half / cfg_.tubelet;
    if (present.rows != p)
        throw ContractError("decoder expects T/d present tokens");
    DecodeCache local;
    DecodeCache& c = cache ? *cache : local;
    c.variant = cfg_.dec_variant;
    c.present = present;
    const int f = cfg_.feat;
    std::vector<double> pe(static_cast<std::size_t>(f));

    switch (cfg_.dec_variant) {
        case DecoderVariant::kIdentity:
            c.fhat = present;
            return c.fhat;
        case DecoderVariant::kDirect: {
            Mat input(2 * p, f);
            for (int r = 0; r < p; ++r)
                std::copy(present.row(r), present.row(r) + f, input.row(r));
            const double* mask = ps_.p(mask_token_);
            for (int s = 0; s < p; ++s) {
                temporal_posenc(p + s, f, pe.data());
                double* dst = input.row(p + s);
                for (int q = 0; q < f; ++q) dst[q] = mask[q] + pe[std::size_t(q)];
            }
            c.input_seq = input;
            Mat out = run_stack(ps_, dec_, input, /*causal=*/false, &c.stack);
            c.fhat = Mat(p, f);
            for (int s = 0; s < p; ++s)
                std::copy(out.row(p + s), out.row(p + s) + f, c.fhat.row(s));
            return c.fhat;
        }
        case DecoderVariant::kAutoregressive: {
            // Roll out one forecast per step; each generated token is fed
            // back with its slot's temporal encoding. No teacher forcing:
            // only the class loss supervises the rollout.
            c.ar_inputs.assign(std::size_t(p), Mat());
            c.ar_stacks.assign(std::size_t(p), StackCache());
            c.fhat = Mat(p, f);
            for (int s = 0; s < p; ++s) {
                Mat input(p + s, f);
                for (int r = 0; r < p; ++r)
                    std::copy(present.row(r), present.row(r) + f, input.row(r));
                for (int q = 0; q < s; ++q) {
                    temporal_posenc(p + q, f, pe.data());
                    double* dst = input.row(p + q);
                    const double* fr = c.fhat.row(q);
                    for (int z = 0; z < f; ++z) dst[z] = fr[z] + pe[std::size_t(z)];
                }
                c.ar_inputs[std::size_t(s)] = input;
                Mat out = run_stack(ps_, dec_, input, /*causal=*/true,
                                    &c.ar_stacks[std::size_t(s)]);
                std::copy(out.row(p + s - 1), out.row(p + s - 1) + f, c.fhat.row(s));
            }
            return c.fhat;
        }
    }
    throw ConfigError("unknown decoder variant");
}

void EastModel::decode_backward(const DecodeCache& c, const Mat& dfhat, Mat& dpresent,
                                GradBuffer& grad) const {
    const int p = c.present.rows;
    const int f = cfg_.feat;
    dpresent = Mat(p, f);
    switch (c.variant) {
        case DecoderVariant::kIdentity:
            dpresent = dfhat;
            return;
        case DecoderVariant::kDirect: {
            Mat dout(2 * p, f);
            for (int s = 0; s < p; ++s)
                std::copy(dfhat.row(s), dfhat.row(s) + f, dout.row(p + s));
            Mat dinput;
            stack_backward(ps_, dec_, c.stack, dout, dinput, grad, false);
            for (int r = 0; r < p; ++r) {
                const double* src = dinput.row(r);
                double* dst = dpresent.row(r);
                for (int q = 0; q < f; ++q) dst[q] += src[q];
            }
            double* dmask = grad.data() + ps_.info(mask_token_).offset;
            for (int s = 0; s < p; ++s) {
                const double* src = dinput.row(p + s);
                for (int q = 0; q < f; ++q) dmask[q] += src[q];
            }
            return;
        }
        case DecoderVariant::kAutoregressive: {
            Mat df = dfhat;  // accumulates feedback gradient per forecast
            for (int s = p - 1; s >= 0; --s) {
                Mat dout(p + s, f);
                std::copy(df.row(s), df.row(s) + f, dout.row(p + s - 1));
                Mat dinput;
                stack_backward(ps_, dec_, c.ar_stacks[std::size_t(s)], dout, dinput,
                               grad, true);
                for (int r = 0; r < p; ++r) {
                    const double* src = dinput.row(r);
                    double* dst = dpresent.row(r);
                    for (int q = 0; q < f; ++q) dst[q] += src[q];
                }
                for (int q = 0; q < s; ++q) {
                    const double* src = dinput.row(p + q);
                    double* dst = df.row(q);
                    for (int z = 0; z < f; ++z) dst[z] += src[z];
                }
            }
            return;
        }
    }
}

Logits EastModel::classify(const Mat& pooled, Head head, HeadCache* cache) const {
    const int f = cfg_.feat;
    const int k = cfg_.num_classes;
    const int wi = head_weight_index(head);
    const int bi = (wi == head_w_) ? head_b_ : head2_b_;
    std::vector<double> mean(std::size_t(f), 0.0);
    for (int r = 0; r < pooled.rows; ++r) {
        const double* src = pooled.row(r);
        for (int j = 0; j < f; ++j) mean[std::size_t(j)] += src[j];
    }
    for (int j = 0; j < f; ++j) mean[std::size_t(j)] /= pooled.rows;
    Logits out(std::size_t(k), 0.0);
    const double* w = ps_.p(wi);
    const double* b = ps_.p(bi);
    for (int j = 0; j < k; ++j) out[std::size_t(j)] = b[j];
    for (int q = 0; q < f; ++q) {
        const double m = mean[std::size_t(q)];
        const double* wr = w + std::size_t(q) * k;
        for (int j = 0; j < k; ++j) out[std::size_t(j)] += m * wr[j];
    }
    if (cache) {
        cache->pooled = pooled;
        cache->mean = mean;
    }
    return out;
}

int EastModel::head_weight_index(Head head) const {
    if (head == Head::kPred || cfg_.classifier == ClassifierMode::kShared)
        return head_w_;
    return head2_w_;
}

bool EastModel::heads_share_parameters() const {
    return head_weight_index(Head::kPred) == head_weight_index(Head::kOracle);
}

namespace {

// dpooled += outer(dlogits) routed through the temporal mean and the head.
void head_backward(const ParameterStore& ps, int wi, int bi,
                   const HeadCache& cache, const std::vector<double>& dlogits,
                   Mat& dpooled, GradBuffer& grad) {
    const int f = int(cache.mean.size());
    const int k = int(dlogits.size());
    double* dw = grad.data() + ps.info(wi).offset;
    double* db = grad.data() + ps.info(bi).offset;
    for (int j = 0; j < k; ++j) db[j] += dlogits[std::size_t(j)];
    const double* w = ps.p(wi);
    std::vector<double> dmean(std::size_t(f), 0.0);
    for (int q = 0; q < f; ++q) {
        const double m = cache.mean[std::size_t(q)];
        double* dwr = dw + std::size_t(q) * k;
        const double* wr = w + std::size_t(q) * k;
        double s = 0.0;
        for (int j = 0; j < k; ++j) {
            dwr[j] += m * dlogits[std::size_t(j)];
            s += wr[j] * dlogits[std::size_t(j)];
        }
        dmean[std::size_t(q)] = s;
    }
    const double inv = 1.0 / cache.pooled.rows;
    dpooled.rows = cache.pooled.rows;
    dpooled.cols = f;
    dpooled.v.assign(std::size_t(dpooled.rows) * f, 0.0);
    for (int r = 0; r < dpooled.rows; ++r) {
        double* dst = dpooled.row(r);
        for (int q = 0; q < f; ++q) dst[q] += dmean[std::size_t(q)] * inv;
    }
}

}  // namespace

Logits EastModel::forward_pred(const video::Clip& observed,
                               const masker::MaskSelection& sel,
                               PredCache* cache) const {
    PredCache local;
    PredCache& c = cache ? *cache : local;
    c.tokens = tokenize(observed, sel, 0, &c.x0);
    if (c.tokens.count() == 0) throw ContractError("mask retained zero tokens");
    c.enc_out = run_stack(ps_, enc_, c.tokens.embeddings, false, &c.enc);
    c.pooled = pool_spatial(c.enc_out, c.tokens.positions, observed.frames,
                            cfg_.tubelet, &c.pool);
    decode(c.pooled, &c.dec);
    c.logits = classify(c.dec.fhat, Head::kPred, &c.head);
    return c.logits;
}

Logits EastModel::forward_oracle(const video::Clip& observed,
                                 const masker::MaskSelection& sel_o,
                                 const video::Clip& unobserved,
                                 const masker::MaskSelection& sel_u,
                                 OracleCache* cache) const {
    OracleCache local;
    OracleCache& c = cache ? *cache : local;
    const int steps = cfg_.frames_per_half / cfg_.tubelet;
    Mat x0o, x0u;
    TokenSequence to = tokenize(observed, sel_o, 0, &x0o);
    TokenSequence tu = tokenize(unobserved, sel_u, steps, &x0u);
    // concatenate the two halves; positions already carry the time offset
    c.tokens.embeddings = Mat(to.count() + tu.count(), cfg_.feat);
    c.x0 = Mat(to.count() + tu.count(), cfg_.token_dim());
    c.tokens.positions = to.positions;
    c.tokens.positions.insert(c.tokens.positions.end(), tu.positions.begin(),
                              tu.positions.end());
    for (int r = 0; r < to.count(); ++r) {
        std::copy(to.embeddings.row(r), to.embeddings.row(r) + cfg_.feat,
                  c.tokens.embeddings.row(r));
        std::copy(x0o.row(r), x0o.row(r) + cfg_.token_dim(), c.x0.row(r));
    }
    for (int r = 0; r < tu.count(); ++r) {
        std::copy(tu.embeddings.row(r), tu.embeddings.row(r) + cfg_.feat,
                  c.tokens.embeddings.row(to.count() + r));
        std::copy(x0u.row(r), x0u.row(r) + cfg_.token_dim(), c.x0.row(to.count() + r));
    }
    if (c.tokens.count() == 0) throw ContractError("mask retained zero tokens");
    c.enc_out = run_stack(ps_, enc_, c.tokens.embeddings, false, &c.enc);
    c.pooled = pool_spatial(c.enc_out, c.tokens.positions,
                            observed.frames + unobserved.frames, cfg_.tubelet, &c.pool);
    c.logits = classify(c.pooled, Head::kOracle, &c.head);
    return c.logits;
}

void EastModel::backward_pred(const PredCache& c, const Logits& dlogits,
                              GradBuffer& grad, const Mat* dfhat_extra) const {
    Mat dfhat;
    head_backward(ps_, head_weight_index(Head::kPred),
                  head_weight_index(Head::kPred) == head_w_ ? head_b_ : head2_b_,
                  c.head, dlogits, dfhat, grad);
    if (dfhat_extra)
        for (std::size_t i = 0; i < dfhat.v.size(); ++i) dfhat.v[i] += dfhat_extra->v[i];
    Mat dpooled;
    decode_backward(c.dec, dfhat, dpooled, grad);
    Mat denc(c.enc_out.rows, c.enc_out.cols);
    pool_spatial_backward(c.pool, dpooled, denc);
    Mat dtokens;
    stack_backward(ps_, enc_, c.enc, denc, dtokens, grad, false);
    linear_backward(c.x0, ps_.p(embed_w_), cfg_.feat, dtokens, nullptr,
                    grad.data() + ps_.info(embed_w_).offset,
                    grad.data() + ps_.info(embed_b_).offset);
}

void EastModel::backward_oracle(const OracleCache& c, const Logits& dlogits,
                                GradBuffer& grad, const Mat* dpooled_extra) const {
    const int wi = head_weight_index(Head::kOracle);
    Mat dpooled;
    head_backward(ps_, wi, wi == head_w_ ? head_b_ : head2_b_, c.head, dlogits,
                  dpooled, grad);
    if (dpooled_extra)
        for (std::size_t i = 0; i < dpooled.v.size(); ++i)
            dpooled.v[i] += dpooled_extra->v[i];
    Mat denc(c.enc_out.rows, c.enc_out.cols);
    pool_spatial_backward(c.pool, dpooled, denc);
    Mat dtokens;
    stack_backward(ps_, enc_, c.enc, denc, dtokens, grad, false);
    linear_backward(c.x0, ps_.p(embed_w_), cfg_.feat, dtokens, nullptr,
                    grad.data() + ps_.info(embed_w_).offset,
                    grad.data() + ps_.info(embed_b_).offset);
}

}  // namespace east::model
