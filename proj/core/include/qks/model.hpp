#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qks/kernels.hpp"
#include "qks/prompt_pool.hpp"
#include "qks/rng.hpp"
#include "qks/tensor.hpp"

namespace qks {

enum class NormMode : std::uint8_t {
    literal, // sublayers exactly as written: residual + attention/FFN, no normalization
    prenorm, // layer normalization before each sublayer, residuals preserved
};

NormMode norm_mode_from_string(const std::string& s);
std::string to_string(NormMode m);

struct ModelConfig {
    std::size_t m = 12;       // query tokens
    std::size_t layers = 7;   // decoder depth L
    std::size_t d = 32;       // model width
    std::size_t heads = 8;
    std::size_t ffn_mult = 4;
    std::size_t channels = 32; // raw feature channels C
    std::size_t grid_h = 8;
    std::size_t grid_w = 8;
    NormMode norm_mode = NormMode::prenorm;

    std::size_t hw() const { return grid_h * grid_w; }
    std::size_t head_dim() const { return d / heads; }
    std::size_t ffn_hidden() const { return ffn_mult * d; }

    /// Throws DataError on m = 0, L = 0, d not divisible by heads, etc.
    void validate() const;
};

// Attention keys carry no bias: softmax is invariant to a per-row constant
// shift, so a key bias can never affect the output.
template <typename T>
struct MsaParams {
    Tensor<T> wq, bq, wk, wv, bv, wo, bo;
};

template <typename T>
struct FfnParams {
    Tensor<T> w1, b1, w2, b2;
};

template <typename T>
struct NormParams {
    Tensor<T> gain, bias;
};

template <typename T>
struct DecoderLayerParams {
    MsaParams<T> self_attn;
    MsaParams<T> cross_attn;
    FfnParams<T> ffn;
    NormParams<T> norm_self, norm_cross, norm_ffn; // prenorm only
};

/// All model parameters. spatial_pos is fixed (2-D sinusoidal); everything
/// else is trainable.
template <typename T>
struct QksParameters {
    Tensor<T> proj_weight; // [C x d]
    Tensor<T> proj_bias;   // [d]
    Tensor<T> query_init;  // [m x d], Q_0
    Tensor<T> query_pos;   // [m x d], trainable position encoding
    Tensor<T> spatial_pos; // [HW x d], fixed
    std::vector<DecoderLayerParams<T>> layers;

    /// Fresh parameters: scaled-uniform weights, zero biases, N(0, 0.02^2)
    /// query tokens and query positions, sinusoidal spatial positions.
    static QksParameters init(const ModelConfig& cfg, Rng& rng);

    /// Same shapes, all zeros; used as a gradient accumulator.
    static QksParameters zeros_like(const ModelConfig& cfg);

    void ensure_finite(const std::string& context) const;
};

/// Fixed 2-D sinusoidal grid encoding: first half of the width encodes the
/// row coordinate, second half the column, interleaved sin/cos, base 10000.
template <typename T>
Tensor<T> sinusoidal_grid_encoding(std::size_t grid_h, std::size_t grid_w, std::size_t d);

/// Visits every trainable tensor in a fixed order with a stable name.
/// The same order defines gradient accumulation and optimizer state layout.
template <typename T>
void for_each_trainable(QksParameters<T>& params, const ModelConfig& cfg,
                        const std::function<void(const std::string&, Tensor<T>&)>& fn);
template <typename T>
void for_each_trainable(const QksParameters<T>& params, const ModelConfig& cfg,
                        const std::function<void(const std::string&, const Tensor<T>&)>& fn);

template <typename T>
struct MsaTrace {
    Tensor<T> qin, kin, vin; // inputs after position encodings
    Tensor<T> qp, kp, vp;    // projected
    Tensor<T> probs;         // [heads, nq, nk], each row sums to 1
    Tensor<T> concat;        // [nq x d] before the output projection
};

template <typename T>
struct DecoderLayerTrace {
    Tensor<T> input;                                   // Q_{l-1}
    LayerNormTrace<T> ln_self, ln_cross, ln_ffn;       // prenorm only
    Tensor<T> self_in, cross_in, ffn_in;               // sublayer inputs (normalized when prenorm)
    MsaTrace<T> self_attn, cross_attn;
    Tensor<T> after_self, after_cross;                 // Q'_l, Q''_l
    Tensor<T> ffn_pre, ffn_act;                        // hidden pre/post activation
    Tensor<T> output;                                  // Q_l
};

template <typename T>
struct ScoreVector {
    std::vector<T> scores;                // s_i per label, raw inner products
    std::vector<std::size_t> argmax_token; // selected query token per label
};

template <typename T>
struct ForwardTrace {
    Tensor<T> raw;        // input spatial features [HW x C]
    Tensor<T> projected;  // [HW x d]
    Tensor<T> feats_tilde; // projected + spatial_pos
    std::vector<DecoderLayerTrace<T>> layers;

    const Tensor<T>& tokens() const { return layers.back().output; } // Q_L

    /// Cross-attention weights as one [L x heads x m x HW] tensor.
    Tensor<T> cross_attention_tensor() const;
};

template <typename T>
struct ForwardResult {
    ScoreVector<T> scores;
    ForwardTrace<T> trace;
};

/// Row-wise affine projection of raw spatial features into model width.
template <typename T>
Tensor<T> project_features(const Tensor<T>& raw, const QksParameters<T>& params,
                           const ModelConfig& cfg);

/// One decoder layer: query self-attention, cross-attention into the
/// spatial features, FFN, all with residuals. Position encodings are added
/// to queries and keys only, never to values.
template <typename T>
DecoderLayerTrace<T> decoder_layer(const Tensor<T>& q_prev, const Tensor<T>& feats,
                                   const Tensor<T>& feats_tilde,
                                   const DecoderLayerParams<T>& lp,
                                   const QksParameters<T>& params, const ModelConfig& cfg);

/// Applies the decoder stack to projected features, starting from Q_0.
template <typename T>
ForwardTrace<T> extract_knowledge(const Tensor<T>& raw, const QksParameters<T>& params,
                                  const ModelConfig& cfg);

/// s_i = max_j <t_i, q_j> over all m tokens; ties resolve to the smallest j.
template <typename T>
ScoreVector<T> share_knowledge(const Tensor<T>& q_tokens, const LabelEmbeddingTable<T>& labels);

/// project -> extract -> share.
template <typename T>
ForwardResult<T> forward(const Tensor<T>& raw, const LabelEmbeddingTable<T>& labels,
                         const QksParameters<T>& params, const ModelConfig& cfg);

template <typename T>
struct LossResult {
    double value = 0.0;
    std::vector<T> d_scores; // gradient w.r.t. every label score
};

/// Per-label sigmoid cross-entropy on raw scores, stable softplus form:
/// sum_p softplus(-s_p) + sum_n softplus(s_n). Negatives are the seen
/// labels absent from `positives`; unseen labels never contribute.
template <typename T>
LossResult<T> classification_loss(const ScoreVector<T>& scores,
                                  const std::vector<std::size_t>& positives,
                                  const std::vector<std::uint8_t>& seen_mask);

/// Margin-1 pairwise hinge, averaged over positive x negative pairs.
/// Subgradient 0 at the hinge kink.
template <typename T>
LossResult<T> ranking_loss(const ScoreVector<T>& scores,
                           const std::vector<std::size_t>& positives,
                           const std::vector<std::uint8_t>& seen_mask);

/// Reverse pass from d_scores through the max-matching, the decoder stack,
/// and the projection; accumulates into `grads` (spatial_pos untouched).
template <typename T>
void backward(const ForwardTrace<T>& trace, const ScoreVector<T>& scores,
              const std::vector<T>& d_scores, const LabelEmbeddingTable<T>& labels,
              const QksParameters<T>& params, const ModelConfig& cfg,
              QksParameters<T>& grads);

enum class LossKind : std::uint8_t { classification, ranking };
LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);

#define QKS_MODEL_EXTERN(T)                                                                   \
    extern template struct QksParameters<T>;                                                  \
    extern template struct ForwardTrace<T>;                                                   \
    extern template Tensor<T> sinusoidal_grid_encoding<T>(std::size_t, std::size_t,           \
                                                          std::size_t);                       \
    extern template void for_each_trainable<T>(                                               \
        QksParameters<T>&, const ModelConfig&,                                                \
        const std::function<void(const std::string&, Tensor<T>&)>&);                          \
    extern template void for_each_trainable<T>(                                               \
        const QksParameters<T>&, const ModelConfig&,                                          \
        const std::function<void(const std::string&, const Tensor<T>&)>&);                    \
    extern template Tensor<T> project_features<T>(const Tensor<T>&, const QksParameters<T>&,  \
                                                  const ModelConfig&);                        \
    extern template DecoderLayerTrace<T> decoder_layer<T>(                                    \
        const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const DecoderLayerParams<T>&,   \
        const QksParameters<T>&, const ModelConfig&);                                         \
    extern template ForwardTrace<T> extract_knowledge<T>(const Tensor<T>&,                    \
                                                         const QksParameters<T>&,             \
                                                         const ModelConfig&);                 \
    extern template ScoreVector<T> share_knowledge<T>(const Tensor<T>&,                       \
                                                      const LabelEmbeddingTable<T>&);         \
    extern template ForwardResult<T> forward<T>(const Tensor<T>&,                             \
                                                const LabelEmbeddingTable<T>&,                \
                                                const QksParameters<T>&, const ModelConfig&); \
    extern template LossResult<T> classification_loss<T>(                                     \
        const ScoreVector<T>&, const std::vector<std::size_t>&,                               \
        const std::vector<std::uint8_t>&);                                                    \
    extern template LossResult<T> ranking_loss<T>(const ScoreVector<T>&,                      \
                                                  const std::vector<std::size_t>&,            \
                                                  const std::vector<std::uint8_t>&);          \
    extern template void backward<T>(const ForwardTrace<T>&, const ScoreVector<T>&,           \
                                     const std::vector<T>&, const LabelEmbeddingTable<T>&,    \
                                     const QksParameters<T>&, const ModelConfig&,             \
                                     QksParameters<T>&);

QKS_MODEL_EXTERN(float)
QKS_MODEL_EXTERN(double)
#undef QKS_MODEL_EXTERN

} // namespace qks
