#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cria/encoder.hpp"
#include "cria/multiview.hpp"
#include "cria/purify.hpp"
#include "cria/rng.hpp"

namespace cria {

struct ModelConfig {
    int dim = 64;        // segment length D == hidden width
    int heads = 4;
    int layers = 5;
    int c_max = 32;
    int rope_start_index = 1;
    bool rope_before_embed = true;
    PurifyConfig purify;
};

// Every learnable tensor of the encoder side: multi-view front end,
// channel embeddings, masking pads, L transformer layers, purify norm.
struct ModelParams {
    ModelConfig cfg;
    LinearAttentionParams lt_tem, lt_spa;
    Tensor e_channel;  // C_max x D
    EncoderPads pads;
    std::vector<EncoderLayerParams> layers;
    Tensor purify_gain, purify_bias;

    void visit(const std::function<void(const std::string&, Tensor&)>& fn);
};

ModelParams init_model(const ModelConfig& cfg, Rng& rng);

// Classification head: y' = ELU(FC2(LayerNorm(ELU(FC1(Dropout(F)))))).
struct HeadParams {
    Tensor fc1_w, fc1_b;     // D x H
    Tensor ln_gain, ln_bias; // H
    Tensor fc2_w, fc2_b;     // H x K
    double dropout_rate = 0.1;

    int num_classes() const { return fc2_w.cols(); }
    void visit(const std::function<void(const std::string&, Tensor&)>& fn);
};

HeadParams init_head(int dim, int hidden, int num_classes, double dropout_rate, Rng& rng);

MultiViewFeatures build_views(const SegmentedSlice& s, const ModelParams& params);

// Full encoder pass: views -> L layers -> purified 1 x D feature.
Tensor embed_slice(const SegmentedSlice& s, const ModelParams& params, const MaskSpec& mask,
                   Rng* rng = nullptr);

Tensor head_forward(const Tensor& features, const HeadParams& head, bool training, Rng* rng = nullptr);

}  // namespace cria
