#pragma once

#include <string>
#include <vector>

#include "east/masker.hpp"
#include "east/mat.hpp"
#include "east/rng.hpp"
#include "east/video.hpp"

namespace east::model {

enum class DecoderVariant { kIdentity, kDirect, kAutoregressive };
enum class ClassifierMode { kShared, kSeparate };

const char* to_string(DecoderVariant v);
const char* to_string(ClassifierMode m);
DecoderVariant decoder_variant_from_string(const std::string& s);
ClassifierMode classifier_mode_from_string(const std::string& s);

struct ModelConfig {
    int feat = 32;             // F
    int enc_layers = 2;
    int enc_heads = 4;
    DecoderVariant dec_variant = DecoderVariant::kDirect;
    int dec_layers = 4;
    int dec_heads = 4;
    int patch = 8;             // p
    int tubelet = 2;           // d
    int frames_per_half = 8;   // T
    int height = 32;
    int width = 32;
    int channels = 1;
    int num_classes = 9;
    ClassifierMode classifier = ClassifierMode::kShared;
    int mlp_ratio = 4;

    void validate() const;
    int token_dim() const { return patch * patch * tubelet * channels; }
    int spatial_cells() const { return (height / patch) * (width / patch); }
    int time_steps(int clip_len) const { return clip_len / tubelet; }
    // N_t = clip_len * H * W / (p^2 * d)
    int tokens_per_clip(int clip_len) const {
        return time_steps(clip_len) * spatial_cells();
    }
};

// ---------------------------------------------------------------------------
// Parameters: one flat double array with named, shaped views. The optimizer,
// gradient checker and checkpoint writer all work off this registry.
// ---------------------------------------------------------------------------

enum class InitKind { kZero, kOne, kTruncNormal };

struct ParamInfo {
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    bool decay = false;  // weight decay applies (2-D weights only)
    InitKind init = InitKind::kZero;
    std::size_t size() const { return std::size_t(rows) * cols; }
};

class ParameterStore {
public:
    int add(std::string name, int rows, int cols, bool decay, InitKind init);
    void init_params(Rng& rng);

    std::size_t size() const { return data_.size(); }
    const std::vector<ParamInfo>& infos() const { return infos_; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double* p(int idx) { return data_.data() + infos_[std::size_t(idx)].offset; }
    const double* p(int idx) const { return data_.data() + infos_[std::size_t(idx)].offset; }
    const ParamInfo& info(int idx) const { return infos_[std::size_t(idx)]; }
    int find(const std::string& name) const;  // -1 when absent

private:
    std::vector<ParamInfo> infos_;
    std::vector<double> data_;
};

// Gradient buffer with the same layout as ParameterStore::data(). Samples in
// a batch each accumulate into their own buffer, reduced in index order.
using GradBuffer = std::vector<double>;

// ---------------------------------------------------------------------------
// Transformer building blocks (shared by encoder and decoder stacks)
// ---------------------------------------------------------------------------

struct LnParams { int g = -1, b = -1; };
struct AttnParams { int wq = -1, wk = -1, wv = -1, wo = -1, bq = -1, bk = -1, bv = -1, bo = -1; };
struct MlpParams { int w1 = -1, b1 = -1, w2 = -1, b2 = -1; };
struct BlockParams { LnParams ln1; AttnParams attn; LnParams ln2; MlpParams mlp; };
struct StackParams {
    std::vector<BlockParams> blocks;
    LnParams final_ln;
    int heads = 1;
};

struct LnCache { Mat xhat; std::vector<double> rstd; };
struct AttnCache {
    Mat xn, q, k, v, concat;
    std::vector<Mat> probs;  // per head, N x N
};
struct MlpCache { Mat xn, z, a; };
struct BlockCache { Mat x_in; LnCache ln1; AttnCache attn; Mat x_mid; LnCache ln2; MlpCache mlp; };
struct StackCache { std::vector<BlockCache> blocks; LnCache final_ln; Mat pre_final; };

// Pre-norm transformer: x += Attn(LN(x)), x += MLP(LN(x)) per block, then a
// final LayerNorm. `causal` restricts attention to positions <= self.
Mat run_stack(const ParameterStore& ps, const StackParams& sp, const Mat& x,
              bool causal, StackCache* cache);
void stack_backward(const ParameterStore& ps, const StackParams& sp,
                    const StackCache& cache, const Mat& dout, Mat& dx,
                    GradBuffer& grad, bool causal);

// ---------------------------------------------------------------------------
// Token sequences and pooling
// ---------------------------------------------------------------------------

struct TokenPos { int t = 0, i = 0, j = 0; };

struct TokenSequence {
    Mat embeddings;                // N x F
    std::vector<TokenPos> positions;
    int count() const { return embeddings.rows; }
};

// Drops masked tokens from an unmasked sequence. Retained tokens keep their
// pre-mask positional identities; output order is (t, i, j) lexicographic
// over retained cells. The sequence and selection must describe one grid.
TokenSequence apply_mask(const TokenSequence& tokens, const masker::MaskSelection& sel);

struct PoolCache {
    std::vector<int> step_of_token;
    std::vector<int> counts;  // per time step
    int steps = 0;
};

// Mean token per time step over retained tokens; a step with no retained
// token falls back to the mean over all retained tokens of the clip.
Mat pool_spatial(const Mat& features, const std::vector<TokenPos>& positions,
                 int clip_len, int tubelet, PoolCache* cache = nullptr);
void pool_spatial_backward(const PoolCache& cache, const Mat& dout, Mat& dfeat);

using Logits = std::vector<double>;

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

enum class Head { kPred, kOracle };

struct HeadCache { Mat pooled; std::vector<double> mean; };

struct DecodeCache {
    DecoderVariant variant = DecoderVariant::kIdentity;
    Mat present;
    Mat input_seq;                  // direct
    StackCache stack;               // direct
    std::vector<Mat> ar_inputs;     // autoregressive, one per generated step
    std::vector<StackCache> ar_stacks;
    Mat fhat;
};

struct PredCache {
    Mat x0;                        // normalized tubelet pixels, N x token_dim
    TokenSequence tokens;
    StackCache enc;
    Mat enc_out;
    PoolCache pool;
    Mat pooled;
    DecodeCache dec;
    HeadCache head;
    Logits logits;
};

struct OracleCache {
    Mat x0;
    TokenSequence tokens;
    StackCache enc;
    Mat enc_out;
    PoolCache pool;
    Mat pooled;                    // 2T/d x F
    HeadCache head;
    Logits logits;
};

class EastModel {
public:
    explicit EastModel(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    ParameterStore& params() { return ps_; }
    const ParameterStore& params() const { return ps_; }
    void init_params(Rng& rng) { ps_.init_params(rng); }

    // Normalizes pixels, embeds retained tubelets and adds their pre-mask
    // (t, i, j) sin-cos encodings. time_offset shifts the temporal identity,
    // which places the unobserved half at steps T/d..2T/d-1 of the oracle
    // clip. x0_out receives the normalized pixel rows when given.
    TokenSequence tokenize(const video::Clip& clip, const masker::MaskSelection& sel,
                           int time_offset = 0, Mat* x0_out = nullptr) const;

    Mat encode(const TokenSequence& tokens, StackCache* cache = nullptr) const;

    // Forecasts T/d future tokens from T/d pooled present tokens.
    Mat decode(const Mat& present, DecodeCache* cache = nullptr) const;

    Logits classify(const Mat& pooled, Head head, HeadCache* cache = nullptr) const;

    Logits forward_pred(const video::Clip& observed, const masker::MaskSelection& sel,
                        PredCache* cache = nullptr) const;
    Logits forward_oracle(const video::Clip& observed, const masker::MaskSelection& sel_o,
                          const video::Clip& unobserved, const masker::MaskSelection& sel_u,
                          OracleCache* cache = nullptr) const;

    // Backward passes accumulate into grad. dfhat_extra / dpooled_extra are
    // additive gradients at the forecast tokens and the oracle pooled
    // sequence, used by the optional L2 alignment loss.
    void backward_pred(const PredCache& cache, const Logits& dlogits,
                       GradBuffer& grad, const Mat* dfhat_extra = nullptr) const;
    void backward_oracle(const OracleCache& cache, const Logits& dlogits,
                         GradBuffer& grad, const Mat* dpooled_extra = nullptr) const;

    bool heads_share_parameters() const;
    int head_weight_index(Head head) const;

    const StackParams& encoder_params() const { return enc_; }
    const StackParams& decoder_params() const { return dec_; }
    int mask_token_index() const { return mask_token_; }

private:
    StackParams build_stack(const std::string& prefix, int layers, int heads);
    void decode_backward(const DecodeCache& cache, const Mat& dfhat, Mat& dpresent,
                         GradBuffer& grad) const;

    ModelConfig cfg_;
    ParameterStore ps_;
    int embed_w_ = -1, embed_b_ = -1;
    StackParams enc_;
    StackParams dec_;
    int mask_token_ = -1;
    int head_w_ = -1, head_b_ = -1;
    int head2_w_ = -1, head2_b_ = -1;  // separate-classifier mode only
};

}  // namespace east::model
