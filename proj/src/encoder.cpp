#include "cria/encoder.hpp"

#include <cmath>

namespace cria {

const char* view_name(View v) {
    switch (v) {
        case View::temporal: return "temporal";
        case View::spatial: return "spatial";
        case View::spectral: return "spectral";
        default: return "none";
    }
}

View view_from_name(const std::string& name) {
    if (name == "temporal") return View::temporal;
    if (name == "spatial") return View::spatial;
    if (name == "spectral") return View::spectral;
    if (name == "none") return View::none;
    throw DimensionError("unknown view name '" + name + "'");
}

namespace {

Tensor attend_head(const Tensor& q, const Tensor& k, const Tensor& v, double value_mask_ratio, Rng* rng) {
    const double scale_factor = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor attn = softmax_lastdim(scale(matmul(q, transpose(k)), scale_factor));
    if (value_mask_ratio > 0.0) {
        if (!rng) throw DimensionError("attention value masking requires an rng");
        std::vector<std::uint8_t> mask(attn.size());
        for (auto& m : mask) m = rng->bernoulli(value_mask_ratio) ? 0 : 1;
        attn = value_mask_renorm(attn, mask);
    }
    return matmul(attn, v);
}

}  // namespace

Tensor multi_head_attention(const Tensor& q_src, const Tensor& kv_src, const MhaParams& p,
                            const Tensor* q_pad, const Tensor* kv_pad, double value_mask_ratio,
                            Rng* rng) {
    const int d = p.w_q.rows();
    if (d % p.heads != 0)
        throw DimensionError("multi_head: width " + std::to_string(d) + " not divisible by " +
                             std::to_string(p.heads) + " heads");
    if (q_src.rows() < 1 || kv_src.rows() < 1) throw DimensionError("attention: empty source");
    const int dh = d / p.heads;

    // A masked view contributes its pad instead of its projection; the
    // replacement happens at the Q/K/V level so the raw view content
    // never reaches the attention block.
    const Tensor q_full = q_pad ? broadcast_rows(*q_pad, q_src.rows()) : matmul(q_src, p.w_q);
    const Tensor k_full = kv_pad ? broadcast_rows(*kv_pad, kv_src.rows()) : matmul(kv_src, p.w_k);
    const Tensor v_full = kv_pad ? broadcast_rows(*kv_pad, kv_src.rows()) : matmul(kv_src, p.w_v);

    std::vector<Tensor> heads;
    heads.reserve(p.heads);
    for (int h = 0; h < p.heads; ++h) {
        heads.push_back(attend_head(slice_cols(q_full, h * dh, dh), slice_cols(k_full, h * dh, dh),
                                    slice_cols(v_full, h * dh, dh), value_mask_ratio, rng));
    }
    return matmul(concat_cols(heads), p.w_o);
}

Tensor self_attention(const Tensor& x, const MhaParams& p, const Tensor* pad, double value_mask_ratio,
                      Rng* rng) {
    return multi_head_attention(x, x, p, pad, pad, value_mask_ratio, rng);
}

Tensor cross_attention(const Tensor& q_src, const Tensor& kv_src, const MhaParams& p, const Tensor* q_pad,
                       double value_mask_ratio, Rng* rng) {
    return multi_head_attention(q_src, kv_src, p, q_pad, nullptr, value_mask_ratio, rng);
}

namespace {

Tensor feed_forward(const Tensor& x, const FfnParams& p) {
    const Tensor h = elu(add_rowvec(matmul(x, p.w1), p.b1));
    return add_rowvec(matmul(h, p.w2), p.b2);
}

// Attention sub-block + FFN sub-block, each wrapped residual + layer norm.
// residual_base differs from q_src only when this stream is masked.
Tensor stream_block(const Tensor& attn_out, const Tensor& residual_base, const StreamLayerParams& p) {
    const Tensor h = layer_norm(add(residual_base, attn_out), p.ln1_gain, p.ln1_bias);
    return layer_norm(add(h, feed_forward(h, p.ffn)), p.ln2_gain, p.ln2_bias);
}

}  // namespace

MultiViewFeatures encoder_layer(const MultiViewFeatures& views, const EncoderLayerParams& p,
                                const EncoderPads& pads, const MaskSpec& mask, Rng* rng) {
    if (views.f_tem.shape() != views.f_spa.shape() || views.f_tem.shape() != views.f_spe.shape())
        throw DimensionError("encoder layer: view shapes diverged");
    const int rows = views.f_spe.rows();
    const double ratio = mask.attn_value_mask_ratio;

    const bool m_spe = mask.masked_view == View::spectral;
    const bool m_tem = mask.masked_view == View::temporal;
    const bool m_spa = mask.masked_view == View::spatial;

    // all three streams read layer l-1 and advance together
    const Tensor sa = self_attention(views.f_spe, p.spe.mha, m_spe ? &pads.spe : nullptr, ratio, rng);
    const Tensor spe_base = m_spe ? broadcast_rows(pads.spe, rows) : views.f_spe;
    MultiViewFeatures out;
    out.channels = views.channels;
    out.segments = views.segments;
    out.dim = views.dim;
    out.f_spe = stream_block(sa, spe_base, p.spe);

    const Tensor* spe_kv_pad = m_spe ? &pads.spe : nullptr;
    const Tensor ca_spa = multi_head_attention(views.f_spa, views.f_spe, p.spa.mha,
                                               m_spa ? &pads.spa : nullptr, spe_kv_pad, ratio, rng);
    out.f_spa = stream_block(ca_spa, m_spa ? broadcast_rows(pads.spa, rows) : views.f_spa, p.spa);

    const Tensor ca_tem = multi_head_attention(views.f_tem, views.f_spe, p.tem.mha,
                                               m_tem ? &pads.tem : nullptr, spe_kv_pad, ratio, rng);
    out.f_tem = stream_block(ca_tem, m_tem ? broadcast_rows(pads.tem, rows) : views.f_tem, p.tem);
    return out;
}

MultiViewFeatures encoder_forward(const MultiViewFeatures& views,
                                  const std::vector<EncoderLayerParams>& layers, const EncoderPads& pads,
                                  const MaskSpec& mask, Rng* rng) {
    if (layers.empty()) throw DimensionError("encoder: at least one layer required");
    MultiViewFeatures cur = views;
    // the mask applies at every layer so masked content never leaks
    for (const auto& layer : layers) cur = encoder_layer(cur, layer, pads, mask, rng);
    return cur;
}

}  // namespace cria
