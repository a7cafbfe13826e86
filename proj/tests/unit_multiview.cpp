#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cria/fft.hpp"
#include "cria/multiview.hpp"
#include "helpers.hpp"

using namespace cria;
using namespace cria::testing;

namespace {

LinearAttentionParams random_lt(int d, Rng& rng) {
    LinearAttentionParams p;
    p.w_q = random_tensor({d, d}, rng, -0.3, 0.3);
    p.w_k = random_tensor({d, d}, rng, -0.3, 0.3);
    p.w_v = random_tensor({d, d}, rng, -0.3, 0.3);
    p.ln_gain = Tensor({d}, std::vector<double>(d, 1.0));
    p.ln_bias = Tensor({d});
    return p;
}

SegmentedSlice random_slice(int c, int n, int d, Rng& rng) {
    SegmentedSlice s;
    s.channels = c;
    s.segments = n;
    s.segment_len = d;
    s.data.resize(static_cast<std::size_t>(c) * n * d);
    for (double& v : s.data) v = rng.uniform(-1.0, 1.0);
    s.channel_ids.resize(c);
    for (int i = 0; i < c; ++i) s.channel_ids[i] = i;
    return s;
}

double phi(double v) { return (v > 0 ? v : std::expm1(v)) + 1.0; }

}  // namespace

TEST_CASE("linear attention matches the quadratic kernel oracle") {
    Rng rng(41);
    for (int trial = 0; trial < 6; ++trial) {
        const int t = 2 + static_cast<int>(rng.below(63)), d = 4 + 2 * static_cast<int>(rng.below(6));
        const Tensor x = random_tensor({t, d}, rng);
        const auto p = random_lt(d, rng);
        Tape::Pause pause;
        const Tensor got = linear_attention_core(x, p);

        // oracle: out_i = sum_j (phi(q_i).phi(k_j)) v_j / sum_j phi(q_i).phi(k_j)
        std::vector<double> q(t * d), k(t * d), v(t * d);
        auto proj = [&](const Tensor& w, std::vector<double>& out) {
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < d; ++j) {
                    double s = 0.0;
                    for (int l = 0; l < d; ++l) s += x.data()[i * d + l] * w.data()[l * d + j];
                    out[i * d + j] = s;
                }
        };
        proj(p.w_q, q);
        proj(p.w_k, k);
        proj(p.w_v, v);
        for (int i = 0; i < t; ++i) {
            std::vector<double> num(d, 0.0);
            double den = 0.0;
            for (int j = 0; j < t; ++j) {
                double w = 0.0;
                for (int l = 0; l < d; ++l) w += phi(q[i * d + l]) * phi(k[j * d + l]);
                den += w;
                for (int l = 0; l < d; ++l) num[l] += w * v[j * d + l];
            }
            for (int l = 0; l < d; ++l)
                CHECK(rel_err(got.data()[i * d + l], num[l] / den) < 1e-9);
        }
    }
}

TEST_CASE("channel registry maps names stably and rejects unknowns") {
    ChannelRegistry reg({"FP1", "FP2", "CZ"});
    CHECK(reg.size() == 3);
    CHECK(reg.lookup("FP1") == 0);
    CHECK(reg.lookup("CZ") == 2);
    CHECK(reg.add("FP1") == 0);  // idempotent
    CHECK(reg.add("OZ") == 3);
    CHECK_THROWS_AS(reg.lookup("XX"), RegistryError);
}

TEST_CASE("view builders flatten to (C*N) x D with row index c*N+n") {
    Rng rng(42);
    const int c = 3, n = 4, d = 8;
    const SegmentedSlice s = random_slice(c, n, d, rng);
    const Tensor e = random_tensor({8, d}, rng, -0.1, 0.1);
    const auto lt = random_lt(d, rng);
    Tape::Pause pause;
    for (const Tensor& f : {build_temporal_view(s, e, lt), build_spatial_view(s, e, lt),
                            build_spectral_view(s, e)}) {
        CHECK(f.rows() == c * n);
        CHECK(f.cols() == d);
    }

    // temporal view: changing channel 1 leaves other channels' rows alone
    SegmentedSlice s2 = s;
    for (int i = 0; i < n * d; ++i) s2.data[static_cast<std::size_t>(1) * n * d + i] += 0.5;
    const Tensor f1 = build_temporal_view(s, e, lt), f2 = build_temporal_view(s2, e, lt);
    for (int r = 0; r < c * n; ++r) {
        const bool in_channel_1 = r >= n && r < 2 * n;
        double diff = 0.0;
        for (int j = 0; j < d; ++j) diff = std::max(diff, std::fabs(f1.data()[r * d + j] - f2.data()[r * d + j]));
        if (in_channel_1)
            CHECK(diff > 1e-9);
        else
            CHECK(diff == 0.0);
    }

    // spatial view mixes across channels within a segment: changing
    // segment 2 of one channel touches exactly the rows with n == 2
    SegmentedSlice s3 = s;
    for (int i = 0; i < d; ++i) s3.data[(static_cast<std::size_t>(0) * n + 2) * d + i] += 0.5;
    const Tensor g1 = build_spatial_view(s, e, lt), g2 = build_spatial_view(s3, e, lt);
    for (int r = 0; r < c * n; ++r) {
        double diff = 0.0;
        for (int j = 0; j < d; ++j) diff = std::max(diff, std::fabs(g1.data()[r * d + j] - g2.data()[r * d + j]));
        if (r % n == 2)
            CHECK(diff > 1e-9);
        else
            CHECK(diff == 0.0);
    }
}

TEST_CASE("spectral view is the fourier magnitude plus embedding, rotary-encoded") {
    Rng rng(43);
    const int c = 2, n = 3, d = 8;
    const SegmentedSlice s = random_slice(c, n, d, rng);
    const Tensor e = random_tensor({4, d}, rng, -0.2, 0.2);
    Tape::Pause pause;
    MultiViewOptions opt;
    const Tensor f = build_spectral_view(s, e, opt);
    // reproduce one row by hand: c=1, n=2 -> row 1*3+2
    std::vector<double> seg(d);
    for (int i = 0; i < d; ++i) seg[i] = s.at(1, 2, i);
    const auto mag = fft_magnitude(seg);
    std::vector<double> row(d);
    for (int i = 0; i < d; ++i) row[i] = mag[i] + e.data()[1 * d + i];
    Tensor rowt({1, d}, row);
    const Tensor want = rope_rows(rowt, {static_cast<double>(2 + opt.rope_start_index)});
    for (int i = 0; i < d; ++i) CHECK(f.data()[(1 * n + 2) * d + i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
}

TEST_CASE("out-of-table channel ids are rejected") {
    Rng rng(44);
    SegmentedSlice s = random_slice(2, 2, 4, rng);
    s.channel_ids = {0, 7};
    const Tensor e = random_tensor({3, 4}, rng);
    const auto lt = random_lt(4, rng);
    CHECK_THROWS_AS(build_temporal_view(s, e, lt), RegistryError);
    CHECK_THROWS_AS(build_spatial_view(s, e, lt), RegistryError);
    CHECK_THROWS_AS(build_spectral_view(s, e), RegistryError);
}
