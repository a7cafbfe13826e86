#include "cria/model.hpp"

#include <cmath>

namespace cria {

namespace {

Tensor normal_init(std::vector<int> shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.normal(0.0, stddev);
    t.set_requires_grad(true);
    return t;
}

Tensor xavier(int fan_in, int fan_out, Rng& rng) {
    return normal_init({fan_in, fan_out}, std::sqrt(2.0 / (fan_in + fan_out)), rng);
}

Tensor ones_param(int n) {
    Tensor t({n}, std::vector<double>(static_cast<std::size_t>(n), 1.0));
    t.set_requires_grad(true);
    return t;
}

Tensor zeros_param(std::vector<int> shape) {
    Tensor t(std::move(shape));
    t.set_requires_grad(true);
    return t;
}

LinearAttentionParams init_lt(int d, Rng& rng) {
    LinearAttentionParams p;
    p.w_q = xavier(d, d, rng);
    p.w_k = xavier(d, d, rng);
    p.w_v = xavier(d, d, rng);
    p.ln_gain = ones_param(d);
    p.ln_bias = zeros_param({d});
    return p;
}

StreamLayerParams init_stream(int d, int heads, Rng& rng) {
    StreamLayerParams p;
    p.mha.w_q = xavier(d, d, rng);
    p.mha.w_k = xavier(d, d, rng);
    p.mha.w_v = xavier(d, d, rng);
    p.mha.w_o = xavier(d, d, rng);
    p.mha.heads = heads;
    p.ln1_gain = ones_param(d);
    p.ln1_bias = zeros_param({d});
    p.ffn.w1 = xavier(d, 4 * d, rng);
    p.ffn.b1 = zeros_param({4 * d});
    p.ffn.w2 = xavier(4 * d, d, rng);
    p.ffn.b2 = zeros_param({d});
    p.ln2_gain = ones_param(d);
    p.ln2_bias = zeros_param({d});
    return p;
}

void visit_lt(const std::string& prefix, LinearAttentionParams& p,
              const std::function<void(const std::string&, Tensor&)>& fn) {
    fn(prefix + ".w_q", p.w_q);
    fn(prefix + ".w_k", p.w_k);
    fn(prefix + ".w_v", p.w_v);
    fn(prefix + ".ln_gain", p.ln_gain);
    fn(prefix + ".ln_bias", p.ln_bias);
}

void visit_stream(const std::string& prefix, StreamLayerParams& p,
                  const std::function<void(const std::string&, Tensor&)>& fn) {
    fn(prefix + ".w_q", p.mha.w_q);
    fn(prefix + ".w_k", p.mha.w_k);
    fn(prefix + ".w_v", p.mha.w_v);
    fn(prefix + ".w_o", p.mha.w_o);
    fn(prefix + ".ln1_gain", p.ln1_gain);
    fn(prefix + ".ln1_bias", p.ln1_bias);
    fn(prefix + ".ffn_w1", p.ffn.w1);
    fn(prefix + ".ffn_b1", p.ffn.b1);
    fn(prefix + ".ffn_w2", p.ffn.w2);
    fn(prefix + ".ffn_b2", p.ffn.b2);
    fn(prefix + ".ln2_gain", p.ln2_gain);
    fn(prefix + ".ln2_bias", p.ln2_bias);
}

}  // namespace

void ModelParams::visit(const std::function<void(const std::string&, Tensor&)>& fn) {
    visit_lt("lt_tem", lt_tem, fn);
    visit_lt("lt_spa", lt_spa, fn);
    fn("e_channel", e_channel);
    fn("pad_tem", pads.tem);
    fn("pad_spe", pads.spe);
    fn("pad_spa", pads.spa);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l);
        visit_stream(p + ".spe", layers[l].spe, fn);
        visit_stream(p + ".spa", layers[l].spa, fn);
        visit_stream(p + ".tem", layers[l].tem, fn);
    }
    fn("purify_gain", purify_gain);
    fn("purify_bias", purify_bias);
}

ModelParams init_model(const ModelConfig& cfg, Rng& rng) {
    if (cfg.dim % 2 != 0) throw DimensionError("model: dim must be even for rotary pairing");
    if (cfg.dim % cfg.heads != 0) throw DimensionError("model: dim must be divisible by head count");
    if (cfg.layers < 1) throw DimensionError("model: at least one layer");
    ModelParams m;
    m.cfg = cfg;
    m.lt_tem = init_lt(cfg.dim, rng);
    m.lt_spa = init_lt(cfg.dim, rng);
    m.e_channel = normal_init({cfg.c_max, cfg.dim}, 0.02, rng);
    m.pads.tem = normal_init({cfg.dim}, 0.02, rng);
    m.pads.spe = normal_init({cfg.dim}, 0.02, rng);
    m.pads.spa = normal_init({cfg.dim}, 0.02, rng);
    m.layers.reserve(cfg.layers);
    for (int l = 0; l < cfg.layers; ++l) {
        EncoderLayerParams layer;
        layer.spe = init_stream(cfg.dim, cfg.heads, rng);
        layer.spa = init_stream(cfg.dim, cfg.heads, rng);
        layer.tem = init_stream(cfg.dim, cfg.heads, rng);
        m.layers.push_back(std::move(layer));
    }
    m.purify_gain = ones_param(cfg.dim);
    m.purify_bias = zeros_param({cfg.dim});
    return m;
}

void HeadParams::visit(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("head.fc1_w", fc1_w);
    fn("head.fc1_b", fc1_b);
    fn("head.ln_gain", ln_gain);
    fn("head.ln_bias", ln_bias);
    fn("head.fc2_w", fc2_w);
    fn("head.fc2_b", fc2_b);
}

HeadParams init_head(int dim, int hidden, int num_classes, double dropout_rate, Rng& rng) {
    if (num_classes < 1) throw DimensionError("head: need at least one output score");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw DimensionError("head: dropout must be in [0,1)");
    HeadParams h;
    h.fc1_w = xavier(dim, hidden, rng);
    h.fc1_b = zeros_param({hidden});
    h.ln_gain = ones_param(hidden);
    h.ln_bias = zeros_param({hidden});
    h.fc2_w = xavier(hidden, num_classes, rng);
    h.fc2_b = zeros_param({num_classes});
    h.dropout_rate = dropout_rate;
    return h;
}

MultiViewFeatures build_views(const SegmentedSlice& s, const ModelParams& params) {
    if (s.segment_len != params.cfg.dim)
        throw DimensionError("build_views: segment length " + std::to_string(s.segment_len) +
                             " != model dim " + std::to_string(params.cfg.dim));
    MultiViewOptions opt;
    opt.rope_start_index = params.cfg.rope_start_index;
    opt.rope_before_embed = params.cfg.rope_before_embed;
    MultiViewFeatures v;
    v.channels = s.channels;
    v.segments = s.segments;
    v.dim = s.segment_len;
    v.f_tem = build_temporal_view(s, params.e_channel, params.lt_tem, opt);
    v.f_spa = build_spatial_view(s, params.e_channel, params.lt_spa, opt);
    v.f_spe = build_spectral_view(s, params.e_channel, opt);
    return v;
}

Tensor embed_slice(const SegmentedSlice& s, const ModelParams& params, const MaskSpec& mask, Rng* rng) {
    const MultiViewFeatures views = build_views(s, params);
    const MultiViewFeatures enc = encoder_forward(views, params.layers, params.pads, mask, rng);
    const Tensor fused = scale(add(add(enc.f_tem, enc.f_spa), enc.f_spe), 1.0 / 3.0);
    return purify_and_fuse(fused, enc.channels, enc.segments, params.cfg.purify, params.purify_gain,
                           params.purify_bias);
}

Tensor head_forward(const Tensor& features, const HeadParams& head, bool training, Rng* rng) {
    Tensor f = features;
    if (training && head.dropout_rate > 0.0) {
        if (!rng) throw DimensionError("head_forward: training dropout requires an rng");
        f = dropout(f, head.dropout_rate, *rng);
    }
    const Tensor z = elu(add_rowvec(matmul(f, head.fc1_w), head.fc1_b));
    const Tensor zn = layer_norm(z, head.ln_gain, head.ln_bias);
    return elu(add_rowvec(matmul(zn, head.fc2_w), head.fc2_b));
}

}  // namespace cria
