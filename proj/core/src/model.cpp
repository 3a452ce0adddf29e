#include "qks/model.hpp"

#include <cmath>
#include <limits>

#include "qks/errors.hpp"

namespace qks {

NormMode norm_mode_from_string(const std::string& s) {
    if (s == "literal") return NormMode::literal;
    if (s == "prenorm") return NormMode::prenorm;
    throw DataError("unknown norm mode '" + s + "' (expected literal|prenorm)");
}

std::string to_string(NormMode m) {
    return m == NormMode::literal ? "literal" : "prenorm";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "classification") return LossKind::classification;
    if (s == "ranking") return LossKind::ranking;
    throw DataError("unknown loss '" + s + "' (expected classification|ranking)");
}

std::string to_string(LossKind k) {
    return k == LossKind::classification ? "classification" : "ranking";
}

void ModelConfig::validate() const {
    if (m == 0) throw DataError("config error: m must be >= 1");
    if (layers == 0) throw DataError("config error: L must be >= 1");
    if (d == 0) throw DataError("config error: d must be >= 1");
    if (heads == 0) throw DataError("config error: heads must be >= 1");
    if (d % heads != 0) {
        throw DataError("config error: d=" + std::to_string(d) + " not divisible by heads=" +
                        std::to_string(heads));
    }
    if (ffn_mult == 0) throw DataError("config error: ffn_mult must be >= 1");
    if (channels == 0) throw DataError("config error: C must be >= 1");
    if (grid_h == 0 || grid_w == 0) throw DataError("config error: grid extents must be >= 1");
}

namespace {

// Layer normalization epsilon used inside the decoder (prenorm mode).
constexpr double kLnEps = 1e-5;

template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor<T> t({fan_in, fan_out});
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-limit, limit));
    return t;
}

template <typename T>
Tensor<T> gaussian(std::vector<std::size_t> shape, double stddev, Rng& rng) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<T>(rng.normal() * stddev);
    return t;
}

template <typename T>
MsaParams<T> init_msa(std::size_t d, Rng& rng) {
    MsaParams<T> p;
    p.wq = glorot_uniform<T>(d, d, rng);
    p.bq = Tensor<T>({d});
    p.wk = glorot_uniform<T>(d, d, rng);
    p.wv = glorot_uniform<T>(d, d, rng);
    p.bv = Tensor<T>({d});
    p.wo = glorot_uniform<T>(d, d, rng);
    p.bo = Tensor<T>({d});
    return p;
}

template <typename T>
MsaParams<T> zero_msa(std::size_t d) {
    return MsaParams<T>{Tensor<T>({d, d}), Tensor<T>({d}), Tensor<T>({d, d}),
                        Tensor<T>({d, d}), Tensor<T>({d}), Tensor<T>({d, d}), Tensor<T>({d})};
}

template <typename T>
NormParams<T> unit_norm(std::size_t d) {
    return NormParams<T>{Tensor<T>::full({d}, T(1)), Tensor<T>({d})};
}

} // namespace

template <typename T>
Tensor<T> sinusoidal_grid_encoding(std::size_t grid_h, std::size_t grid_w, std::size_t d) {
    const std::size_t d_row = d / 2;
    const std::size_t d_col = d - d_row;
    Tensor<T> pos({grid_h * grid_w, d});
    auto fill_axis = [](T* dst, std::size_t n, double coord) {
        for (std::size_t j = 0; j < n; ++j) {
            const double exponent = 2.0 * static_cast<double>(j / 2) / static_cast<double>(n);
            const double angle = coord / std::pow(10000.0, exponent);
            dst[j] = static_cast<T>((j % 2 == 0) ? std::sin(angle) : std::cos(angle));
        }
    };
    for (std::size_t y = 0; y < grid_h; ++y) {
        for (std::size_t x = 0; x < grid_w; ++x) {
            T* row = pos.row(y * grid_w + x);
            fill_axis(row, d_row, static_cast<double>(y));
            fill_axis(row + d_row, d_col, static_cast<double>(x));
        }
    }
    return pos;
}

template <typename T>
QksParameters<T> QksParameters<T>::init(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    QksParameters<T> p;
    p.proj_weight = glorot_uniform<T>(cfg.channels, cfg.d, rng);
    p.proj_bias = Tensor<T>({cfg.d});
    p.query_init = gaussian<T>({cfg.m, cfg.d}, 0.02, rng);
    p.query_pos = gaussian<T>({cfg.m, cfg.d}, 0.02, rng);
    p.spatial_pos = sinusoidal_grid_encoding<T>(cfg.grid_h, cfg.grid_w, cfg.d);
    p.layers.resize(cfg.layers);
    for (auto& layer : p.layers) {
        layer.self_attn = init_msa<T>(cfg.d, rng);
        layer.cross_attn = init_msa<T>(cfg.d, rng);
        layer.ffn.w1 = glorot_uniform<T>(cfg.d, cfg.ffn_hidden(), rng);
        layer.ffn.b1 = Tensor<T>({cfg.ffn_hidden()});
        layer.ffn.w2 = glorot_uniform<T>(cfg.ffn_hidden(), cfg.d, rng);
        layer.ffn.b2 = Tensor<T>({cfg.d});
        layer.norm_self = unit_norm<T>(cfg.d);
        layer.norm_cross = unit_norm<T>(cfg.d);
        layer.norm_ffn = unit_norm<T>(cfg.d);
    }
    return p;
}

template <typename T>
QksParameters<T> QksParameters<T>::zeros_like(const ModelConfig& cfg) {
    cfg.validate();
    QksParameters<T> p;
    p.proj_weight = Tensor<T>({cfg.channels, cfg.d});
    p.proj_bias = Tensor<T>({cfg.d});
    p.query_init = Tensor<T>({cfg.m, cfg.d});
    p.query_pos = Tensor<T>({cfg.m, cfg.d});
    p.spatial_pos = Tensor<T>({cfg.hw(), cfg.d});
    p.layers.resize(cfg.layers);
    for (auto& layer : p.layers) {
        layer.self_attn = zero_msa<T>(cfg.d);
        layer.cross_attn = zero_msa<T>(cfg.d);
        layer.ffn.w1 = Tensor<T>({cfg.d, cfg.ffn_hidden()});
        layer.ffn.b1 = Tensor<T>({cfg.ffn_hidden()});
        layer.ffn.w2 = Tensor<T>({cfg.ffn_hidden(), cfg.d});
        layer.ffn.b2 = Tensor<T>({cfg.d});
        layer.norm_self = NormParams<T>{Tensor<T>({cfg.d}), Tensor<T>({cfg.d})};
        layer.norm_cross = NormParams<T>{Tensor<T>({cfg.d}), Tensor<T>({cfg.d})};
        layer.norm_ffn = NormParams<T>{Tensor<T>({cfg.d}), Tensor<T>({cfg.d})};
    }
    return p;
}

namespace {

template <typename P, typename Fn>
void visit_trainable(P& p, const ModelConfig& cfg, Fn&& fn) {
    fn("proj_weight", p.proj_weight);
    fn("proj_bias", p.proj_bias);
    fn("query_init", p.query_init);
    fn("query_pos", p.query_pos);
    const bool pre = cfg.norm_mode == NormMode::prenorm;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& layer = p.layers[l];
        const std::string prefix = "layers." + std::to_string(l) + ".";
        auto msa = [&](const char* tag, auto& a) {
            fn(prefix + tag + ".wq", a.wq);
            fn(prefix + tag + ".bq", a.bq);
            fn(prefix + tag + ".wk", a.wk);
            fn(prefix + tag + ".wv", a.wv);
            fn(prefix + tag + ".bv", a.bv);
            fn(prefix + tag + ".wo", a.wo);
            fn(prefix + tag + ".bo", a.bo);
        };
        msa("self", layer.self_attn);
        msa("cross", layer.cross_attn);
        fn(prefix + "ffn.w1", layer.ffn.w1);
        fn(prefix + "ffn.b1", layer.ffn.b1);
        fn(prefix + "ffn.w2", layer.ffn.w2);
        fn(prefix + "ffn.b2", layer.ffn.b2);
        if (pre) {
            fn(prefix + "norm_self.gain", layer.norm_self.gain);
            fn(prefix + "norm_self.bias", layer.norm_self.bias);
            fn(prefix + "norm_cross.gain", layer.norm_cross.gain);
            fn(prefix + "norm_cross.bias", layer.norm_cross.bias);
            fn(prefix + "norm_ffn.gain", layer.norm_ffn.gain);
            fn(prefix + "norm_ffn.bias", layer.norm_ffn.bias);
        }
    }
}

} // namespace

template <typename T>
void for_each_trainable(QksParameters<T>& params, const ModelConfig& cfg,
                        const std::function<void(const std::string&, Tensor<T>&)>& fn) {
    visit_trainable(params, cfg, fn);
}

template <typename T>
void for_each_trainable(const QksParameters<T>& params, const ModelConfig& cfg,
                        const std::function<void(const std::string&, const Tensor<T>&)>& fn) {
    visit_trainable(params, cfg, fn);
}

template <typename T>
void QksParameters<T>::ensure_finite(const std::string& context) const {
    proj_weight.ensure_finite(context + ": proj_weight");
    proj_bias.ensure_finite(context + ": proj_bias");
    query_init.ensure_finite(context + ": query_init");
    query_pos.ensure_finite(context + ": query_pos");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = context + ": layers." + std::to_string(l) + ".";
        const auto& lay = layers[l];
        for (const auto* a : {&lay.self_attn, &lay.cross_attn}) {
            a->wq.ensure_finite(p + "wq");
            a->wk.ensure_finite(p + "wk");
            a->wv.ensure_finite(p + "wv");
            a->wo.ensure_finite(p + "wo");
        }
        lay.ffn.w1.ensure_finite(p + "ffn.w1");
        lay.ffn.w2.ensure_finite(p + "ffn.w2");
    }
}

// ---------------------------------------------------------------------------
// Multi-head attention

namespace {

template <typename T>
Tensor<T> msa_forward(const Tensor<T>& qin, const Tensor<T>& kin, const Tensor<T>& vin,
                      const MsaParams<T>& p, std::size_t heads, MsaTrace<T>& trace) {
    trace.qin = qin;
    trace.kin = kin;
    trace.vin = vin;
    trace.qp = linear(qin, p.wq, p.bq);
    trace.kp = matmul(kin, p.wk);
    trace.vp = linear(vin, p.wv, p.bv);

    const std::size_t nq = qin.rows(), nk = kin.rows(), d = qin.cols();
    const std::size_t dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    trace.probs = Tensor<T>({heads, nq, nk});
    trace.concat = Tensor<T>({nq, d});
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < nq; ++i) {
            T* prow = trace.probs.data() + (h * nq + i) * nk;
            const T* q = trace.qp.row(i) + off;
            for (std::size_t j = 0; j < nk; ++j) {
                const T* k = trace.kp.row(j) + off;
                T s = 0;
                for (std::size_t c = 0; c < dh; ++c) s += q[c] * k[c];
                prow[j] = s * scale;
            }
            softmax_row_inplace(prow, nk);
            T* out = trace.concat.row(i) + off;
            for (std::size_t j = 0; j < nk; ++j) {
                const T pj = prow[j];
                const T* v = trace.vp.row(j) + off;
                for (std::size_t c = 0; c < dh; ++c) out[c] += pj * v[c];
            }
        }
    }
    return linear(trace.concat, p.wo, p.bo);
}

template <typename T>
void msa_backward(const MsaTrace<T>& trace, const MsaParams<T>& p, std::size_t heads,
                  const Tensor<T>& d_out, MsaParams<T>& pg, Tensor<T>& d_qin, Tensor<T>& d_kin,
                  Tensor<T>& d_vin) {
    const std::size_t nq = trace.qin.rows(), nk = trace.kin.rows(), d = trace.qin.cols();
    const std::size_t dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    Tensor<T> d_concat({nq, d});
    linear_backward(trace.concat, p.wo, d_out, d_concat, pg.wo, pg.bo);

    Tensor<T> d_qp({nq, d}), d_kp({nk, d}), d_vp({nk, d});
    std::vector<T> d_probs(nk), d_scores(nk);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < nq; ++i) {
            const T* prow = trace.probs.data() + (h * nq + i) * nk;
            const T* d_oh = d_concat.row(i) + off;
            for (std::size_t j = 0; j < nk; ++j) {
                const T* v = trace.vp.row(j) + off;
                T acc = 0;
                for (std::size_t c = 0; c < dh; ++c) acc += d_oh[c] * v[c];
                d_probs[j] = acc;
                T* dv = d_vp.row(j) + off;
                const T pj = prow[j];
                for (std::size_t c = 0; c < dh; ++c) dv[c] += pj * d_oh[c];
            }
            std::fill(d_scores.begin(), d_scores.end(), T(0));
            softmax_row_backward(prow, d_probs.data(), d_scores.data(), nk);
            const T* q = trace.qp.row(i) + off;
            T* dq = d_qp.row(i) + off;
            for (std::size_t j = 0; j < nk; ++j) {
                const T g = d_scores[j] * scale;
                const T* k = trace.kp.row(j) + off;
                T* dk = d_kp.row(j) + off;
                for (std::size_t c = 0; c < dh; ++c) {
                    dq[c] += g * k[c];
                    dk[c] += g * q[c];
                }
            }
        }
    }
    linear_backward(trace.qin, p.wq, d_qp, d_qin, pg.wq, pg.bq);
    matmul_backward(trace.kin, p.wk, d_kp, d_kin, pg.wk);
    linear_backward(trace.vin, p.wv, d_vp, d_vin, pg.wv, pg.bv);
}

} // namespace

// ---------------------------------------------------------------------------
// Decoder

template <typename T>
Tensor<T> project_features(const Tensor<T>& raw, const QksParameters<T>& params,
                           const ModelConfig& cfg) {
    if (raw.rank() != 2 || raw.cols() != cfg.channels) {
        throw DataError("feature channel mismatch: got " + raw.shape_str() + ", expected [HW x " +
                        std::to_string(cfg.channels) + "]");
    }
    if (raw.rows() != cfg.hw()) {
        throw DataError("feature grid mismatch: got " + std::to_string(raw.rows()) +
                        " cells, expected " + std::to_string(cfg.hw()));
    }
    return linear(raw, params.proj_weight, params.proj_bias);
}

template <typename T>
DecoderLayerTrace<T> decoder_layer(const Tensor<T>& q_prev, const Tensor<T>& feats,
                                   const Tensor<T>& feats_tilde,
                                   const DecoderLayerParams<T>& lp,
                                   const QksParameters<T>& params, const ModelConfig& cfg) {
    const bool pre = cfg.norm_mode == NormMode::prenorm;
    const T eps = static_cast<T>(kLnEps);
    DecoderLayerTrace<T> t;
    t.input = q_prev;

    t.self_in = pre ? layernorm_forward(q_prev, lp.norm_self.gain, lp.norm_self.bias, eps, t.ln_self)
                    : q_prev;
    Tensor<T> q_tilde = add(t.self_in, params.query_pos);
    Tensor<T> self_out = msa_forward(q_tilde, q_tilde, t.self_in, lp.self_attn, cfg.heads, t.self_attn);
    t.after_self = add(q_prev, self_out);

    t.cross_in = pre ? layernorm_forward(t.after_self, lp.norm_cross.gain, lp.norm_cross.bias, eps,
                                         t.ln_cross)
                     : t.after_self;
    Tensor<T> q_tilde2 = add(t.cross_in, params.query_pos);
    Tensor<T> cross_out =
        msa_forward(q_tilde2, feats_tilde, feats, lp.cross_attn, cfg.heads, t.cross_attn);
    t.after_cross = add(t.after_self, cross_out);

    t.ffn_in = pre ? layernorm_forward(t.after_cross, lp.norm_ffn.gain, lp.norm_ffn.bias, eps, t.ln_ffn)
                   : t.after_cross;
    t.ffn_pre = linear(t.ffn_in, lp.ffn.w1, lp.ffn.b1);
    t.ffn_act = gelu(t.ffn_pre);
    Tensor<T> ffn_out = linear(t.ffn_act, lp.ffn.w2, lp.ffn.b2);
    t.output = add(t.after_cross, ffn_out);
    return t;
}

namespace {

/// Reverse of decoder_layer; returns the gradient w.r.t. the layer input.
template <typename T>
Tensor<T> decoder_layer_backward(const DecoderLayerTrace<T>& t, const DecoderLayerParams<T>& lp,
                                 const ModelConfig& cfg, const Tensor<T>& d_output,
                                 DecoderLayerParams<T>& lg, Tensor<T>& d_qpos, Tensor<T>& d_feats,
                                 Tensor<T>& d_feats_tilde) {
    const bool pre = cfg.norm_mode == NormMode::prenorm;
    const std::size_t m = t.input.rows(), d = t.input.cols();

    // FFN sublayer
    Tensor<T> d_after_cross = d_output;
    {
        Tensor<T> d_act({m, t.ffn_pre.cols()});
        linear_backward(t.ffn_act, lp.ffn.w2, d_output, d_act, lg.ffn.w2, lg.ffn.b2);
        Tensor<T> d_pre({m, t.ffn_pre.cols()});
        gelu_backward(t.ffn_pre, d_act, d_pre);
        Tensor<T> d_ffn_in({m, d});
        linear_backward(t.ffn_in, lp.ffn.w1, d_pre, d_ffn_in, lg.ffn.w1, lg.ffn.b1);
        if (pre) {
            layernorm_backward(t.ln_ffn, lp.norm_ffn.gain, d_ffn_in, d_after_cross,
                               lg.norm_ffn.gain, lg.norm_ffn.bias);
        } else {
            add_inplace(d_after_cross, d_ffn_in);
        }
    }

    // Cross-attention sublayer
    Tensor<T> d_after_self = d_after_cross;
    {
        Tensor<T> d_qin({m, d});
        msa_backward(t.cross_attn, lp.cross_attn, cfg.heads, d_after_cross, lg.cross_attn, d_qin,
                     d_feats_tilde, d_feats);
        add_inplace(d_qpos, d_qin); // q~ = cross_in + query_pos
        if (pre) {
            layernorm_backward(t.ln_cross, lp.norm_cross.gain, d_qin, d_after_self,
                               lg.norm_cross.gain, lg.norm_cross.bias);
        } else {
            add_inplace(d_after_self, d_qin);
        }
    }

    // Self-attention sublayer
    Tensor<T> d_input = d_after_self;
    {
        Tensor<T> d_qin({m, d}), d_kin({m, d}), d_vin({m, d});
        msa_backward(t.self_attn, lp.self_attn, cfg.heads, d_after_self, lg.self_attn, d_qin,
                     d_kin, d_vin);
        add_inplace(d_qpos, d_qin);
        add_inplace(d_qpos, d_kin); // position encodings feed queries and keys
        Tensor<T> d_self_in = d_qin;
        add_inplace(d_self_in, d_kin);
        add_inplace(d_self_in, d_vin);
        if (pre) {
            layernorm_backward(t.ln_self, lp.norm_self.gain, d_self_in, d_input, lg.norm_self.gain,
                               lg.norm_self.bias);
        } else {
            add_inplace(d_input, d_self_in);
        }
    }
    return d_input;
}

} // namespace

template <typename T>
ForwardTrace<T> extract_knowledge(const Tensor<T>& raw, const QksParameters<T>& params,
                                  const ModelConfig& cfg) {
    cfg.validate();
    ForwardTrace<T> trace;
    trace.raw = raw;
    trace.projected = project_features(raw, params, cfg);
    trace.feats_tilde = add(trace.projected, params.spatial_pos);
    trace.layers.reserve(cfg.layers);
    const Tensor<T>* q = &params.query_init;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        trace.layers.push_back(
            decoder_layer(*q, trace.projected, trace.feats_tilde, params.layers[l], params, cfg));
        q = &trace.layers.back().output;
    }
    return trace;
}

template <typename T>
Tensor<T> ForwardTrace<T>::cross_attention_tensor() const {
    const std::size_t L = layers.size();
    if (L == 0) return Tensor<T>();
    const auto& probs0 = layers.front().cross_attn.probs;
    const std::size_t heads = probs0.size(0), m = probs0.size(1), hw = probs0.size(2);
    Tensor<T> out({L, heads, m, hw});
    T* dst = out.data();
    for (std::size_t l = 0; l < L; ++l) {
        const auto& src = layers[l].cross_attn.probs;
        std::copy(src.data(), src.data() + src.numel(), dst);
        dst += src.numel();
    }
    return out;
}

template <typename T>
ScoreVector<T> share_knowledge(const Tensor<T>& q_tokens, const LabelEmbeddingTable<T>& labels) {
    if (q_tokens.cols() != labels.width()) {
        throw DataError("width mismatch: tokens " + q_tokens.shape_str() + " vs labels " +
                        labels.vectors.shape_str());
    }
    const std::size_t m = q_tokens.rows(), n = labels.n_labels(), d = labels.width();
    ScoreVector<T> sv;
    sv.scores.resize(n);
    sv.argmax_token.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T* t = labels.vectors.row(i);
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < m; ++j) {
            const T* q = q_tokens.row(j);
            T s = 0;
            for (std::size_t c = 0; c < d; ++c) s += t[c] * q[c];
            if (s > best) { // strict: ties keep the smallest j
                best = s;
                best_j = j;
            }
        }
        sv.scores[i] = best;
        sv.argmax_token[i] = best_j;
    }
    return sv;
}

template <typename T>
ForwardResult<T> forward(const Tensor<T>& raw, const LabelEmbeddingTable<T>& labels,
                         const QksParameters<T>& params, const ModelConfig& cfg) {
    ForwardResult<T> result;
    result.trace = extract_knowledge(raw, params, cfg);
    result.scores = share_knowledge(result.trace.tokens(), labels);
    return result;
}

// ---------------------------------------------------------------------------
// Losses

namespace {

template <typename T>
void split_positive_negative(const ScoreVector<T>& scores,
                             const std::vector<std::size_t>& positives,
                             const std::vector<std::uint8_t>& seen_mask,
                             std::vector<std::uint8_t>& is_positive) {
    if (seen_mask.size() != scores.scores.size()) {
        throw DataError("seen mask length does not match score count");
    }
    is_positive.assign(scores.scores.size(), 0);
    for (std::size_t p : positives) {
        if (p >= scores.scores.size()) throw DataError("positive label index out of range");
        if (!seen_mask[p]) {
            throw DataError("positive label " + std::to_string(p) +
                            " is unseen; training annotations must be seen labels");
        }
        is_positive[p] = 1;
    }
}

} // namespace

template <typename T>
LossResult<T> classification_loss(const ScoreVector<T>& scores,
                                  const std::vector<std::size_t>& positives,
                                  const std::vector<std::uint8_t>& seen_mask) {
    std::vector<std::uint8_t> is_positive;
    split_positive_negative(scores, positives, seen_mask, is_positive);

    LossResult<T> out;
    out.d_scores.assign(scores.scores.size(), T(0));
    std::size_t contributors = 0;
    for (std::size_t i = 0; i < scores.scores.size(); ++i) {
        if (!seen_mask[i]) continue; // unseen labels never contribute
        ++contributors;
        const double s = static_cast<double>(scores.scores[i]);
        if (is_positive[i]) {
            out.value += softplus(-s);
            out.d_scores[i] = static_cast<T>(sigmoid(s) - 1.0);
        } else {
            out.value += softplus(s);
            out.d_scores[i] = static_cast<T>(sigmoid(s));
        }
    }
    if (contributors == 0) {
        throw DataError("classification_loss: no seen labels to score");
    }
    return out;
}

template <typename T>
LossResult<T> ranking_loss(const ScoreVector<T>& scores,
                           const std::vector<std::size_t>& positives,
                           const std::vector<std::uint8_t>& seen_mask) {
    std::vector<std::uint8_t> is_positive;
    split_positive_negative(scores, positives, seen_mask, is_positive);

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < scores.scores.size(); ++i) {
        if (!seen_mask[i]) continue;
        (is_positive[i] ? pos : neg).push_back(i);
    }
    if (pos.empty() || neg.empty()) {
        throw DataError("ranking_loss: needs at least one positive and one negative seen label");
    }

    LossResult<T> out;
    out.d_scores.assign(scores.scores.size(), T(0));
    const double w = 1.0 / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
    for (std::size_t p : pos) {
        const double sp = static_cast<double>(scores.scores[p]);
        for (std::size_t n : neg) {
            const double sn = static_cast<double>(scores.scores[n]);
            const double margin = 1.0 + sn - sp;
            if (margin > 0.0) { // subgradient 0 exactly at the kink
                out.value += w * margin;
                out.d_scores[n] += static_cast<T>(w);
                out.d_scores[p] -= static_cast<T>(w);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backward

template <typename T>
void backward(const ForwardTrace<T>& trace, const ScoreVector<T>& scores,
              const std::vector<T>& d_scores, const LabelEmbeddingTable<T>& labels,
              const QksParameters<T>& params, const ModelConfig& cfg, QksParameters<T>& grads) {
    if (trace.layers.empty()) throw DataError("backward: empty forward trace");
    if (trace.raw.numel() == 0) throw DataError("backward: trace is missing the raw features");
    if (d_scores.size() != scores.scores.size()) {
        throw DataError("backward: d_scores length mismatch");
    }
    const std::size_t m = cfg.m, d = cfg.d, hw = cfg.hw();

    // Score gradients route through the max to the argmax token only.
    Tensor<T> d_tokens({m, d});
    for (std::size_t i = 0; i < d_scores.size(); ++i) {
        const T g = d_scores[i];
        if (g == T(0)) continue;
        const T* t = labels.vectors.row(i);
        T* dq = d_tokens.row(scores.argmax_token[i]);
        for (std::size_t c = 0; c < d; ++c) dq[c] += g * t[c];
    }

    Tensor<T> d_feats({hw, d}), d_feats_tilde({hw, d});
    Tensor<T> d_q = std::move(d_tokens);
    for (std::size_t l = cfg.layers; l-- > 0;) {
        d_q = decoder_layer_backward(trace.layers[l], params.layers[l], cfg, d_q, grads.layers[l],
                                     grads.query_pos, d_feats, d_feats_tilde);
    }
    add_inplace(grads.query_init, d_q);

    // feats_tilde = projected + spatial_pos (spatial_pos is fixed)
    add_inplace(d_feats, d_feats_tilde);
    Tensor<T> d_raw({hw, cfg.channels});
    linear_backward(trace.raw, params.proj_weight, d_feats, d_raw, grads.proj_weight,
                    grads.proj_bias);
}

#define QKS_MODEL_INSTANTIATE(T)                                                                  \
    template struct QksParameters<T>;                                                            \
    template struct ForwardTrace<T>;                                                             \
    template Tensor<T> sinusoidal_grid_encoding<T>(std::size_t, std::size_t, std::size_t);        \
    template void for_each_trainable<T>(                                                         \
        QksParameters<T>&, const ModelConfig&,                                                   \
        const std::function<void(const std::string&, Tensor<T>&)>&);                             \
    template void for_each_trainable<T>(                                                         \
        const QksParameters<T>&, const ModelConfig&,                                             \
        const std::function<void(const std::string&, const Tensor<T>&)>&);                       \
    template Tensor<T> project_features<T>(const Tensor<T>&, const QksParameters<T>&,            \
                                           const ModelConfig&);                                  \
    template DecoderLayerTrace<T> decoder_layer<T>(const Tensor<T>&, const Tensor<T>&,           \
                                                   const Tensor<T>&, const DecoderLayerParams<T>&, \
                                                   const QksParameters<T>&, const ModelConfig&); \
    template ForwardTrace<T> extract_knowledge<T>(const Tensor<T>&, const QksParameters<T>&,     \
                                                  const ModelConfig&);                           \
    template ScoreVector<T> share_knowledge<T>(const Tensor<T>&, const LabelEmbeddingTable<T>&); \
    template ForwardResult<T> forward<T>(const Tensor<T>&, const LabelEmbeddingTable<T>&,        \
                                         const QksParameters<T>&, const ModelConfig&);           \
    template LossResult<T> classification_loss<T>(const ScoreVector<T>&,                         \
                                                  const std::vector<std::size_t>&,               \
                                                  const std::vector<std::uint8_t>&);             \
    template LossResult<T> ranking_loss<T>(const ScoreVector<T>&, const std::vector<std::size_t>&, \
                                           const std::vector<std::uint8_t>&);                    \
    template void backward<T>(const ForwardTrace<T>&, const ScoreVector<T>&,                     \
                              const std::vector<T>&, const LabelEmbeddingTable<T>&,              \
                              const QksParameters<T>&, const ModelConfig&, QksParameters<T>&);

QKS_MODEL_INSTANTIATE(float)
QKS_MODEL_INSTANTIATE(double)
#undef QKS_MODEL_INSTANTIATE

} // namespace qks
