#pragma once

#include "cria/multiview.hpp"
#include "cria/rng.hpp"
#include "cria/tensor.hpp"

namespace cria {

enum class View { none, temporal, spatial, spectral };

const char* view_name(View v);
View view_from_name(const std::string& name);

struct MaskSpec {
    View masked_view = View::none;
    double attn_value_mask_ratio = 0.0;  // post-softmax zeroing probability
};

struct MhaParams {
    Tensor w_q, w_k, w_v, w_o;  // D x D
    int heads = 1;
};

struct FfnParams {
    Tensor w1, b1, w2, b2;  // D x 4D and back
};

struct StreamLayerParams {
    MhaParams mha;
    Tensor ln1_gain, ln1_bias;
    FfnParams ffn;
    Tensor ln2_gain, ln2_bias;
};

struct EncoderLayerParams {
    StreamLayerParams spe, spa, tem;
};

// Multi-head scaled-dot attention. When q_pad / kv_pad are given the
// corresponding projected inputs are replaced by the pad broadcast, which
// is what makes view masking leak-free. rng drives post-softmax value
// masking when value_mask_ratio > 0.
Tensor multi_head_attention(const Tensor& q_src, const Tensor& kv_src, const MhaParams& p,
                            const Tensor* q_pad = nullptr, const Tensor* kv_pad = nullptr,
                            double value_mask_ratio = 0.0, Rng* rng = nullptr);

Tensor self_attention(const Tensor& x, const MhaParams& p, const Tensor* pad = nullptr,
                      double value_mask_ratio = 0.0, Rng* rng = nullptr);
Tensor cross_attention(const Tensor& q_src, const Tensor& kv_src, const MhaParams& p,
                       const Tensor* q_pad = nullptr, double value_mask_ratio = 0.0,
                       Rng* rng = nullptr);

struct EncoderPads {
    Tensor tem, spe, spa;  // length-D learnable padding blocks
};

MultiViewFeatures encoder_layer(const MultiViewFeatures& views, const EncoderLayerParams& p,
                                const EncoderPads& pads, const MaskSpec& mask, Rng* rng = nullptr);

MultiViewFeatures encoder_forward(const MultiViewFeatures& views,
                                  const std::vector<EncoderLayerParams>& layers,
                                  const EncoderPads& pads, const MaskSpec& mask, Rng* rng = nullptr);

}  // namespace cria
