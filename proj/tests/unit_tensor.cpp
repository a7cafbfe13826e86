#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "cria/rng.hpp"
#include "cria/tensor.hpp"
#include "helpers.hpp"

using namespace cria;
using namespace cria::testing;

namespace {

constexpr double kTol = 1e-4;

// Reduces an op's output with a fixed random weighting so every output
// coordinate contributes to the checked scalar.
double check_op(const std::function<Tensor(const Tensor&)>& op, const Tensor& x,
                std::uint64_t weight_seed = 999) {
    Tensor w;
    {
        Tape::Pause pause;
        const Tensor y = op(x);
        Rng wr(weight_seed);
        w = random_tensor(y.shape(), wr);
    }
    return finite_difference_check([&](const Tensor& t) { return sum(mul(op(t), w)); }, x);
}

}  // namespace

TEST_CASE("pointwise op gradients") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_tensor({3, 4}, rng);
        const Tensor pos = random_tensor({3, 4}, rng, 0.2, 2.0);
        const Tensor off = random_tensor({3, 4}, rng, 0.3, 1.0);  // bounded away from 0 for |x|
        CHECK(check_op([](const Tensor& t) { return neg(t); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return abs_t(t); }, off) < kTol);
        CHECK(check_op([](const Tensor& t) { return square(t); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return elu(t); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return exp_t(t); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return log_t(t); }, pos) < kTol);
        CHECK(check_op([](const Tensor& t) { return sigmoid(t); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return pow_const(t, 2.5); }, pos) < kTol);
        CHECK(check_op([](const Tensor& t) { return scale(t, -1.3); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return add_const(t, 0.7); }, x) < kTol);
    }
}

TEST_CASE("binary op gradients in both arguments") {
    Rng rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
        const Tensor v = random_tensor({4}, rng);
        const Tensor s = random_tensor({3, 1}, rng, 0.5, 2.0);
        CHECK(check_op([&](const Tensor& t) { return add(t, b); }, a) < kTol);
        CHECK(check_op([&](const Tensor& t) { return add(a, t); }, b) < kTol);
        CHECK(check_op([&](const Tensor& t) { return sub(t, b); }, a) < kTol);
        CHECK(check_op([&](const Tensor& t) { return sub(a, t); }, b) < kTol);
        CHECK(check_op([&](const Tensor& t) { return mul(t, b); }, a) < kTol);
        CHECK(check_op([&](const Tensor& t) { return mul(a, t); }, b) < kTol);
        CHECK(check_op([&](const Tensor& t) { return add_rowvec(t, v); }, a) < kTol);
        CHECK(check_op([&](const Tensor& t) { return add_rowvec(a, t); }, v) < kTol);
        CHECK(check_op([&](const Tensor& t) { return div_rows(t, s); }, a) < kTol);
        CHECK(check_op([&](const Tensor& t) { return div_rows(a, t); }, s) < kTol);
    }
}

TEST_CASE("matmul and transpose gradients") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor a = random_tensor({3, 5}, rng), b = random_tensor({5, 2}, rng);
        CHECK(check_op([&](const Tensor& t) { return matmul(t, b); }, a) < kTol);
        CHECK(check_op([&](const Tensor& t) { return matmul(a, t); }, b) < kTol);
        CHECK(check_op([](const Tensor& t) { return transpose(t); }, a) < kTol);
        CHECK(check_op([&](const Tensor& t) { return matmul(transpose(t), t); }, a) < kTol);
    }
}

TEST_CASE("shape plumbing gradients") {
    Rng rng(24);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_tensor({4, 6}, rng);
        const Tensor y = random_tensor({4, 3}, rng);
        CHECK(check_op([](const Tensor& t) { return reshape(t, {6, 4}); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return slice_cols(t, 1, 3); }, x) < kTol);
        CHECK(check_op([&](const Tensor& t) { return concat_cols({t, y}); }, x) < kTol);
        CHECK(check_op([&](const Tensor& t) { return concat_rows({t, x}); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return gather_rows(t, {2, 0, 2, 3}); }, x) < kTol);
    }
}

TEST_CASE("reduction and normalization gradients") {
    Rng rng(25);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_tensor({4, 6}, rng);
        const Tensor g = random_tensor({6}, rng, 0.5, 1.5), b = random_tensor({6}, rng);
        CHECK(check_op([](const Tensor& t) { return sum(t); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return row_sums(t); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return col_mean(t); }, x) < kTol);
        CHECK(check_op([](const Tensor& t) { return softmax_lastdim(t); }, x) < kTol);
        CHECK(check_op([&](const Tensor& t) { return layer_norm(t, g, b); }, x) < kTol);
        CHECK(check_op([&](const Tensor& t) { return layer_norm(x, t, b); }, g) < kTol);
        CHECK(check_op([&](const Tensor& t) { return layer_norm(x, g, t); }, b) < kTol);
        CHECK(check_op([](const Tensor& t) { return l2_normalize_rows(t); }, x) < kTol);
    }
}

TEST_CASE("rotary encoding gradient and structure") {
    Rng rng(26);
    const std::vector<double> pos{1.0, 2.0, 5.0, 9.0};
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_tensor({4, 6}, rng);
        CHECK(check_op([&](const Tensor& t) { return rope_rows(t, pos); }, x) < kTol);
    }
    // rotation preserves the norm of every complex pair
    const Tensor x = random_tensor({4, 6}, rng);
    Tape::Pause pause;
    const Tensor y = rope_rows(x, pos);
    for (int r = 0; r < 4; ++r)
        for (int d = 0; d < 3; ++d) {
            const double nx = std::hypot(x.data()[r * 6 + 2 * d], x.data()[r * 6 + 2 * d + 1]);
            const double ny = std::hypot(y.data()[r * 6 + 2 * d], y.data()[r * 6 + 2 * d + 1]);
            CHECK(nx == doctest::Approx(ny).epsilon(1e-12));
        }
    // inner products depend on relative position only
    const Tensor q = random_tensor({1, 6}, rng), k = random_tensor({1, 6}, rng);
    auto dot_at = [&](double m, double n) {
        const Tensor qm = rope_rows(q, {m}), kn = rope_rows(k, {n});
        double s = 0.0;
        for (int i = 0; i < 6; ++i) s += qm.data()[i] * kn.data()[i];
        return s;
    };
    CHECK(dot_at(3.0, 7.0) == doctest::Approx(dot_at(10.0, 14.0)).epsilon(1e-9));
    CHECK(dot_at(2.0, 2.0) == doctest::Approx(dot_at(8.0, 8.0)).epsilon(1e-9));
}

TEST_CASE("attention value masking renormalizes and falls back to uniform") {
    Rng rng(27);
    const Tensor logits = random_tensor({3, 5}, rng);
    Tensor attn;
    {
        Tape::Pause pause;
        attn = softmax_lastdim(logits);
    }
    std::vector<std::uint8_t> mask(15, 1);
    mask[1] = mask[3] = 0;          // partial row
    for (int j = 0; j < 5; ++j) mask[5 + j] = 0;  // fully masked row
    Tape::Pause pause;
    const Tensor y = value_mask_renorm(attn, mask);
    for (int r = 0; r < 3; ++r) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) s += y.data()[r * 5 + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (int j = 0; j < 5; ++j) CHECK(y.data()[5 + j] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(y.data()[1] == 0.0);
    CHECK(y.data()[3] == 0.0);

    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_tensor({3, 5}, rng, 0.05, 1.0);
        std::vector<std::uint8_t> m(15);
        for (auto& v : m) v = rng.bernoulli(0.7) ? 1 : 0;
        for (int j = 0; j < 5; ++j) m[10 + j] = 1;  // keep one full row so both paths appear
        CHECK(check_op([&](const Tensor& t) { return value_mask_renorm(t, m); }, x) < kTol);
    }
}

TEST_CASE("loss gradients and values") {
    Rng rng(28);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor logits = random_tensor({4, 4}, rng, -2.0, 2.0);
        CHECK(finite_difference_check([](const Tensor& t) { return ce_identity(t); }, logits) < kTol);
        const std::vector<int> labels{1, 3, 0, 2};
        CHECK(finite_difference_check([&](const Tensor& t) { return ce_labels(t, labels); }, logits) < kTol);
        const Tensor s = random_tensor({4, 1}, rng, -2.0, 2.0);
        const std::vector<int> ybin{1, 0, 0, 1};
        CHECK(finite_difference_check([&](const Tensor& t) { return bce_with_logits(t, ybin); }, s) < kTol);
    }
    // uniform logits: both CE forms hit ln K
    const Tensor z({4, 4}, std::vector<double>(16, 0.0));
    Tape::Pause pause;
    CHECK(ce_identity(z).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(ce_labels(z, {0, 3, 1, 2}).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    const Tensor s0({2, 1}, {0.0, 0.0});
    CHECK(bce_with_logits(s0, {0, 1}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const Tensor shot({1, 1}, {50.0});
    CHECK(bce_with_logits(shot, {1}).item() < 1e-20);
    CHECK(std::isfinite(bce_with_logits(shot, {1}).item()));
}

TEST_CASE("dropout is inverted and exact for the sampled mask") {
    Rng rng(29);
    const Tensor x = random_tensor({6, 5}, rng, 0.5, 1.5);
    // same substream seed -> same mask on every call, so the check is exact
    for (int trial = 0; trial < 20; ++trial) {
        const std::uint64_t seed = rng.next_u64();
        auto op = [&, seed](const Tensor& t) {
            Rng r(seed);
            return dropout(t, 0.4, r);
        };
        CHECK(check_op(op, x) < kTol);
    }
    Tape::Pause pause;
    Rng r1(5), r2(5);
    const Tensor a = dropout(x, 0.4, r1), b = dropout(x, 0.4, r2);
    CHECK(max_abs_diff(a.data(), b.data()) == 0.0);
    // kept entries are scaled by 1/(1-rate)
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK((a.data()[i] == 0.0 || a.data()[i] == doctest::Approx(x.data()[i] / 0.6).epsilon(1e-12)));
}

TEST_CASE("softmax rows sum to one and layer norm standardizes") {
    Rng rng(30);
    Tape::Pause pause;
    const Tensor x = random_tensor({5, 7}, rng, -3.0, 3.0);
    const Tensor sm = softmax_lastdim(x);
    for (int r = 0; r < 5; ++r) {
        double s = 0.0;
        for (int j = 0; j < 7; ++j) s += sm.data()[r * 7 + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    const Tensor ones({7}, std::vector<double>(7, 1.0));
    const Tensor zero({7}, std::vector<double>(7, 0.0));
    const Tensor ln = layer_norm(x, ones, zero);
    for (int r = 0; r < 5; ++r) {
        double m = 0.0, v = 0.0;
        for (int j = 0; j < 7; ++j) m += ln.data()[r * 7 + j];
        m /= 7;
        for (int j = 0; j < 7; ++j) v += (ln.data()[r * 7 + j] - m) * (ln.data()[r * 7 + j] - m);
        CHECK(std::fabs(m) < 1e-12);
        CHECK(v / 7 == doctest::Approx(1.0).epsilon(1e-3));  // eps in the denominator shifts variance
    }
    const Tensor l2 = l2_normalize_rows(x);
    for (int r = 0; r < 5; ++r) {
        double n = 0.0;
        for (int j = 0; j < 7; ++j) n += l2.data()[r * 7 + j] * l2.data()[r * 7 + j];
        CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("dimension errors are loud") {
    const Tensor a({2, 3}), b({4, 5});
    CHECK_THROWS_AS(matmul(a, b), DimensionError);
    CHECK_THROWS_AS(add(a, b), DimensionError);
    CHECK_THROWS_AS(reshape(a, {7}), DimensionError);
    CHECK_THROWS_AS(slice_cols(a, 2, 5), DimensionError);
    CHECK_THROWS_AS(gather_rows(a, {0, 9}), DimensionError);
    CHECK_THROWS_AS(ce_identity(a), DimensionError);  // square only
    CHECK_THROWS_AS(ce_labels(a, {0, 1, 5}), DimensionError);
}
