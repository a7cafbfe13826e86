#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cria/purify.hpp"
#include "helpers.hpp"

using namespace cria;
using namespace cria::testing;

namespace {

// exhaustive oracle: recompute every score with raw loops and pick
// top-k by scanning, ties to the lower index
std::vector<int> oracle_topk(const std::vector<double>& scores, int k) {
    std::vector<char> taken(scores.size(), 0);
    std::vector<int> out;
    for (int pick = 0; pick < k; ++pick) {
        int best = -1;
        for (int i = 0; i < static_cast<int>(scores.size()); ++i)
            if (!taken[i] && (best < 0 || scores[i] > scores[best])) best = i;
        taken[best] = 1;
        out.push_back(best);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("selection matches exhaustive enumeration") {
    Rng rng(61);
    for (int trial = 0; trial < 30; ++trial) {
        const int c = 2 + static_cast<int>(rng.below(6)), n = 2 + static_cast<int>(rng.below(6)), d = 4;
        const Tensor x = random_tensor({c * n, d}, rng);
        PurifyConfig cfg;
        cfg.k_c = 1 + static_cast<int>(rng.below(c));
        cfg.k_t = 1 + static_cast<int>(rng.below(n));

        std::vector<double> norms(c * n);
        for (int r = 0; r < c * n; ++r) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += x.data()[r * d + j] * x.data()[r * d + j];
            norms[r] = std::sqrt(s);
        }
        std::vector<double> cs(c, 0.0);
        for (int ch = 0; ch < c; ++ch) {
            for (int seg = 0; seg < n; ++seg) cs[ch] += norms[ch * n + seg];
            cs[ch] /= n;
        }
        const auto got = purify_select(x, c, n, cfg);
        CHECK(got.channels == oracle_topk(cs, cfg.k_c));
        const auto scores = channel_scores(x, c, n);
        for (int ch = 0; ch < c; ++ch) CHECK(scores[ch] == doctest::Approx(cs[ch]).epsilon(1e-12));
        for (std::size_t i = 0; i < got.channels.size(); ++i) {
            std::vector<double> seg_scores(norms.begin() + got.channels[i] * n,
                                           norms.begin() + (got.channels[i] + 1) * n);
            CHECK(got.segments[i] == oracle_topk(seg_scores, cfg.k_t));
        }
    }
}

TEST_CASE("ties break toward the lower index") {
    // two identical channels: channel 0 must win
    std::vector<double> data{1.0, 0.0, 1.0, 0.0,   // c0: two equal segments
                             1.0, 0.0, 1.0, 0.0};  // c1: identical copy
    const Tensor x({4, 2}, data);
    PurifyConfig cfg;
    cfg.k_c = 1;
    cfg.k_t = 1;
    const auto sel = purify_select(x, 2, 2, cfg);
    CHECK(sel.channels == std::vector<int>{0});
    CHECK(sel.segments[0] == std::vector<int>{0});
}

TEST_CASE("defaults keep ceil(C/2) channels and ceil(N/2) segments") {
    Rng rng(62);
    const Tensor x = random_tensor({5 * 3, 4}, rng);
    const auto sel = purify_select(x, 5, 3, PurifyConfig{});
    CHECK(sel.channels.size() == 3);
    CHECK(sel.segments[0].size() == 2);
}

TEST_CASE("fusion equals the hand-computed mean of selected rows") {
    Rng rng(63);
    const int c = 4, n = 3, d = 6;
    const Tensor x = random_tensor({c * n, d}, rng);
    PurifyConfig cfg;
    cfg.k_c = 2;
    cfg.k_t = 2;
    const Tensor gain({d}, std::vector<double>(d, 1.0));
    const Tensor bias({d});
    Tape::Pause pause;
    const Tensor got = purify_and_fuse(x, c, n, cfg, gain, bias);
    CHECK(got.rows() == 1);
    CHECK(got.cols() == d);

    const auto sel = purify_select(x, c, n, cfg);
    std::vector<double> fused(d, 0.0);
    for (std::size_t i = 0; i < sel.channels.size(); ++i)
        for (int seg : sel.segments[i])
            for (int j = 0; j < d; ++j)
                fused[j] += x.data()[(sel.channels[i] * n + seg) * d + j] / (2.0 * sel.channels.size());
    double mean = 0.0, var = 0.0;
    for (double v : fused) mean += v / d;
    for (double v : fused) var += (v - mean) * (v - mean) / d;
    for (int j = 0; j < d; ++j)
        CHECK(got.data()[j] == doctest::Approx((fused[j] - mean) / std::sqrt(var + 1e-5)).epsilon(1e-9));
}

TEST_CASE("gradient reaches only the selected rows") {
    Rng rng(64);
    const int c = 3, n = 3, d = 4;
    Tensor x = random_tensor({c * n, d}, rng);
    x.set_requires_grad(true);
    PurifyConfig cfg;
    cfg.k_c = 1;
    cfg.k_t = 2;
    const Tensor gain({d}, std::vector<double>(d, 1.0));
    const Tensor bias({d});
    Tape tape;
    Tape::Scope scope(tape);
    const auto sel = purify_select(x, c, n, cfg);
    backward(sum(purify_and_fuse(x, c, n, cfg, gain, bias)));
    for (int r = 0; r < c * n; ++r) {
        const bool selected = r / n == sel.channels[0] &&
                              std::find(sel.segments[0].begin(), sel.segments[0].end(), r % n) !=
                                  sel.segments[0].end();
        double g = 0.0;
        for (int j = 0; j < d; ++j) g = std::max(g, std::fabs(x.grad()[r * d + j]));
        if (selected)
            CHECK(g > 0.0);
        else
            CHECK(g == 0.0);
    }
}

TEST_CASE("shape and argument validation") {
    Rng rng(65);
    const Tensor x = random_tensor({6, 4}, rng);
    CHECK_THROWS_AS(channel_scores(x, 4, 2), DimensionError);
    CHECK_NOTHROW(purify_select(x, 2, 3, PurifyConfig{99, 99}));  // clamped to C, N
    const auto sel = purify_select(x, 2, 3, PurifyConfig{99, 99});
    CHECK(sel.channels.size() == 2);
    CHECK(sel.segments[0].size() == 3);
}
