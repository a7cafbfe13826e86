#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "cria/dsp.hpp"
#include "cria/tensor.hpp"

namespace cria {

struct RegistryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Electrode-name -> embedding-row map covering every channel seen in
// pre-training; lets one parameter table serve variable-channel inputs.
class ChannelRegistry {
public:
    ChannelRegistry() = default;
    explicit ChannelRegistry(const std::vector<std::string>& names) {
        for (const auto& n : names) add(n);
    }
    int add(const std::string& name) {
        auto [it, inserted] = index_.emplace(name, static_cast<int>(index_.size()));
        return it->second;
    }
    int lookup(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw RegistryError("channel registry: unknown channel '" + name + "'");
        return it->second;
    }
    int size() const { return static_cast<int>(index_.size()); }

private:
    std::unordered_map<std::string, int> index_;
};

struct LinearAttentionParams {
    Tensor w_q, w_k, w_v;      // D x D
    Tensor ln_gain, ln_bias;   // D
};

// The three per-slice feature streams, each flattened to (C*N) x D with
// row index c*N + n.
struct MultiViewFeatures {
    Tensor f_tem, f_spa, f_spe;
    int channels = 0, segments = 0, dim = 0;
};

// Rotary encoding of an N x D block, positions start_index..start_index+N-1.
Tensor rope_encode(const Tensor& x, int start_index = 1);

// Kernelized single-layer attention phi(Q)(phi(K)^T V) with phi = elu+1,
// row-normalized, wrapped residual + layer norm.
Tensor linear_attention(const Tensor& x, const LinearAttentionParams& p);
// Attention output before the residual/norm wrapping (oracle surface).
Tensor linear_attention_core(const Tensor& q_in, const LinearAttentionParams& p);

struct MultiViewOptions {
    int rope_start_index = 1;
    bool rope_before_embed = true;  // RoPE first, then add channel embedding
};

Tensor build_temporal_view(const SegmentedSlice& s, const Tensor& e_channel,
                           const LinearAttentionParams& p, const MultiViewOptions& opt = {});
Tensor build_spatial_view(const SegmentedSlice& s, const Tensor& e_channel,
                          const LinearAttentionParams& p, const MultiViewOptions& opt = {});
Tensor build_spectral_view(const SegmentedSlice& s, const Tensor& e_channel,
                           const MultiViewOptions& opt = {});

// Broadcast of a length-D vector to rows x D (differentiable in v).
Tensor broadcast_rows(const Tensor& v, int rows);

}  // namespace cria
