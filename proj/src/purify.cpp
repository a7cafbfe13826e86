#include "cria/purify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cria/kernels.hpp"

namespace cria {

namespace {

// top-k indices by score, ties broken toward the lower index
std::vector<int> top_k(const std::vector<double>& scores, int k) {
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

std::vector<double> row_norms(const Tensor& x) {
    const int r = x.rows(), c = x.cols();
    std::vector<double> norms(r);
    for (int i = 0; i < r; ++i) {
        const double* row = x.data().data() + static_cast<std::size_t>(i) * c;
        norms[i] = std::sqrt(kernels::dot(row, row, c));
    }
    return norms;
}

}  // namespace

std::vector<double> channel_scores(const Tensor& x, int channels, int segments) {
    if (x.rows() != channels * segments)
        throw DimensionError("channel_scores: rows " + std::to_string(x.rows()) + " != C*N");
    const auto norms = row_norms(x);
    std::vector<double> scores(channels, 0.0);
    for (int c = 0; c < channels; ++c) {
        for (int n = 0; n < segments; ++n) scores[c] += norms[static_cast<std::size_t>(c) * segments + n];
        scores[c] /= segments;
    }
    return scores;
}

PurifySelection purify_select(const Tensor& x, int channels, int segments, const PurifyConfig& cfg) {
    const int k_c = std::clamp(cfg.k_c > 0 ? cfg.k_c : (channels + 1) / 2, 1, channels);
    const int k_t = std::clamp(cfg.k_t > 0 ? cfg.k_t : (segments + 1) / 2, 1, segments);

    PurifySelection sel;
    sel.channels = top_k(channel_scores(x, channels, segments), k_c);
    std::sort(sel.channels.begin(), sel.channels.end());
    const auto norms = row_norms(x);
    for (int c : sel.channels) {
        std::vector<double> seg_scores(norms.begin() + static_cast<std::size_t>(c) * segments,
                                       norms.begin() + static_cast<std::size_t>(c + 1) * segments);
        auto segs = top_k(seg_scores, k_t);
        std::sort(segs.begin(), segs.end());
        sel.segments.push_back(std::move(segs));
    }
    return sel;
}

Tensor purify_and_fuse(const Tensor& x, int channels, int segments, const PurifyConfig& cfg,
                       const Tensor& ln_gain, const Tensor& ln_bias) {
    const PurifySelection sel = purify_select(x, channels, segments, cfg);
    std::vector<Tensor> channel_means;
    channel_means.reserve(sel.channels.size());
    for (std::size_t i = 0; i < sel.channels.size(); ++i) {
        std::vector<int> rows;
        rows.reserve(sel.segments[i].size());
        for (int n : sel.segments[i]) rows.push_back(sel.channels[i] * segments + n);
        channel_means.push_back(col_mean(gather_rows(x, rows)));
    }
    const Tensor fused = col_mean(concat_rows(channel_means));  // 1 x D
    return layer_norm(fused, ln_gain, ln_bias);
}

}  // namespace cria
