#pragma once

#include <vector>

#include "cria/tensor.hpp"

namespace cria {

struct PurifyConfig {
    int k_c = 0;  // channels to keep; <=0 means ceil(C/2)
    int k_t = 0;  // segments to keep; <=0 means ceil(N/2)
};

// Mean over segments of the Euclidean norm of each segment feature
// vector; x is (C*N) x D with row c*N + n.
std::vector<double> channel_scores(const Tensor& x, int channels, int segments);

struct PurifySelection {
    std::vector<int> channels;                   // selected, ties to lower index
    std::vector<std::vector<int>> segments;      // per selected channel
};

PurifySelection purify_select(const Tensor& x, int channels, int segments, const PurifyConfig& cfg);

// Top-k_c channels by energy, top-k_t segments within each, averaged and
// layer-normalized. Selection is a hard, non-differentiable choice;
// gradient flows only through the selected rows. Returns 1 x D.
Tensor purify_and_fuse(const Tensor& x, int channels, int segments, const PurifyConfig& cfg,
                       const Tensor& ln_gain, const Tensor& ln_bias);

}  // namespace cria
