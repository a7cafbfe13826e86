#include "cria/multiview.hpp"

#include <numeric>

#include "cria/fft.hpp"

namespace cria {

namespace {

Tensor ones_const(int rows, int cols) {
    return Tensor({rows, cols}, std::vector<double>(static_cast<std::size_t>(rows) * cols, 1.0));
}

// Channel block of a segmented slice as a constant N x D tensor.
Tensor channel_block(const SegmentedSlice& s, int c) {
    const std::size_t off = static_cast<std::size_t>(c) * s.segments * s.segment_len;
    return Tensor({s.segments, s.segment_len},
                  std::vector<double>(s.data.begin() + off,
                                      s.data.begin() + off + static_cast<std::size_t>(s.segments) * s.segment_len));
}

// Segment n across channels as a constant C x D tensor.
Tensor segment_block(const SegmentedSlice& s, int n) {
    std::vector<double> out(static_cast<std::size_t>(s.channels) * s.segment_len);
    for (int c = 0; c < s.channels; ++c) {
        const std::size_t off = (static_cast<std::size_t>(c) * s.segments + n) * s.segment_len;
        std::copy_n(s.data.begin() + off, s.segment_len, out.begin() + static_cast<std::size_t>(c) * s.segment_len);
    }
    return Tensor({s.channels, s.segment_len}, std::move(out));
}

Tensor channel_row(const Tensor& e_channel, int id) {
    if (id < 0 || id >= e_channel.rows())
        throw RegistryError("channel id " + std::to_string(id) + " outside embedding table of " +
                            std::to_string(e_channel.rows()));
    return reshape(gather_rows(e_channel, {id}), {e_channel.cols()});
}

}  // namespace

Tensor broadcast_rows(const Tensor& v, int rows) {
    const int d = static_cast<int>(v.size());
    return matmul(ones_const(rows, 1), reshape(v, {1, d}));
}

Tensor rope_encode(const Tensor& x, int start_index) {
    std::vector<double> positions(x.rows());
    std::iota(positions.begin(), positions.end(), static_cast<double>(start_index));
    return rope_rows(x, positions);
}

Tensor linear_attention_core(const Tensor& x, const LinearAttentionParams& p) {
    const Tensor q = matmul(x, p.w_q);
    const Tensor k = matmul(x, p.w_k);
    const Tensor v = matmul(x, p.w_v);
    const Tensor phi_q = add_const(elu(q), 1.0);
    const Tensor phi_k = add_const(elu(k), 1.0);
    const Tensor kv = matmul(transpose(phi_k), v);               // D x D
    const Tensor num = matmul(phi_q, kv);                        // T x D
    const Tensor k_sum = matmul(ones_const(1, x.rows()), phi_k); // 1 x D
    const Tensor den = matmul(phi_q, transpose(k_sum));          // T x 1
    return div_rows(num, den);
}

Tensor linear_attention(const Tensor& x, const LinearAttentionParams& p) {
    return layer_norm(add(x, linear_attention_core(x, p)), p.ln_gain, p.ln_bias);
}

Tensor build_temporal_view(const SegmentedSlice& s, const Tensor& e_channel,
                           const LinearAttentionParams& p, const MultiViewOptions& opt) {
    std::vector<Tensor> per_channel;
    per_channel.reserve(s.channels);
    for (int c = 0; c < s.channels; ++c) {
        Tensor x = channel_block(s, c);
        const Tensor e = channel_row(e_channel, s.channel_ids[c]);
        if (opt.rope_before_embed)
            x = add_rowvec(rope_encode(x, opt.rope_start_index), e);
        else
            x = rope_encode(add_rowvec(x, e), opt.rope_start_index);
        per_channel.push_back(linear_attention(x, p));
    }
    return concat_rows(per_channel);  // (C*N) x D, row c*N + n
}

Tensor build_spatial_view(const SegmentedSlice& s, const Tensor& e_channel,
                          const LinearAttentionParams& p, const MultiViewOptions& opt) {
    const int c_count = s.channels, n_count = s.segments;
    std::vector<Tensor> per_segment;
    per_segment.reserve(n_count);
    for (int n = 0; n < n_count; ++n) {
        Tensor x = segment_block(s, n);
        // RoPE indexes the segment (temporal) position, shared by all rows
        const std::vector<double> pos(c_count, static_cast<double>(n + opt.rope_start_index));
        for (int c = 0; c < c_count; ++c)
            if (s.channel_ids[c] < 0 || s.channel_ids[c] >= e_channel.rows())
                throw RegistryError("channel id " + std::to_string(s.channel_ids[c]) +
                                    " outside embedding table of " + std::to_string(e_channel.rows()));
        const Tensor e = gather_rows(e_channel, s.channel_ids);
        if (opt.rope_before_embed)
            x = add(rope_rows(x, pos), e);
        else
            x = rope_rows(add(x, e), pos);
        per_segment.push_back(linear_attention(x, p));  // C x D
    }
    const Tensor stacked = concat_rows(per_segment);  // (N*C) x D, row n*C + c
    std::vector<int> reorder(static_cast<std::size_t>(c_count) * n_count);
    for (int c = 0; c < c_count; ++c)
        for (int n = 0; n < n_count; ++n) reorder[static_cast<std::size_t>(c) * n_count + n] = n * c_count + c;
    return gather_rows(stacked, reorder);
}

Tensor build_spectral_view(const SegmentedSlice& s, const Tensor& e_channel, const MultiViewOptions& opt) {
    if (s.segment_len < 2) throw DimensionError("spectral view: segment length must be >= 2");
    const int c_count = s.channels, n_count = s.segments, d = s.segment_len;
    std::vector<double> mags(static_cast<std::size_t>(c_count) * n_count * d);
    std::vector<double> seg(d);
    for (int c = 0; c < c_count; ++c)
        for (int n = 0; n < n_count; ++n) {
            const std::size_t off = (static_cast<std::size_t>(c) * n_count + n) * d;
            std::copy_n(s.data.begin() + off, d, seg.begin());
            const auto m = fft_magnitude(seg);
            std::copy_n(m.begin(), d, mags.begin() + off);
        }
    Tensor x({c_count * n_count, d}, std::move(mags));

    std::vector<int> ids(static_cast<std::size_t>(c_count) * n_count);
    std::vector<double> pos(ids.size());
    for (int c = 0; c < c_count; ++c)
        for (int n = 0; n < n_count; ++n) {
            const std::size_t r = static_cast<std::size_t>(c) * n_count + n;
            ids[r] = s.channel_ids[c];
            pos[r] = static_cast<double>(n + opt.rope_start_index);
        }
    for (int id : ids)
        if (id < 0 || id >= e_channel.rows())
            throw RegistryError("channel id " + std::to_string(id) + " outside embedding table of " +
                                std::to_string(e_channel.rows()));
    const Tensor e = gather_rows(e_channel, ids);
    return rope_rows(add(x, e), pos);  // position codes inserted after FFT + embedding
}

}  // namespace cria
