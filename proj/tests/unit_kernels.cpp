#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "cria/kernels.hpp"
#include "cria/rng.hpp"
#include "helpers.hpp"

using namespace cria;
using namespace cria::testing;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

void naive_nn(std::vector<double>& c, const std::vector<double>& a, const std::vector<double>& b,
              std::size_t m, std::size_t k, std::size_t n) {
    c.assign(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[i * k + p] * b[p * n + j];
}

}  // namespace

TEST_CASE("scalar matmul matches a naive triple loop") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t m = 1 + rng.below(9), k = 1 + rng.below(9), n = 1 + rng.below(9);
        const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
        std::vector<double> want, got(m * n);
        naive_nn(want, a, b, m, k, n);
        kernels::scalar::matmul_nn(got.data(), a.data(), b.data(), m, k, n, false);
        CHECK(max_abs_diff(want, got) < 1e-14);

        // nt: B given as n x k; tn: A given as k x m
        std::vector<double> bt(k * n), at(m * k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) bt[i * k + j] = b[j * n + i];
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < m; ++j) at[i * m + j] = a[j * k + i];
        kernels::scalar::matmul_nt(got.data(), a.data(), bt.data(), m, k, n, false);
        CHECK(max_abs_diff(want, got) < 1e-14);
        kernels::scalar::matmul_tn(got.data(), at.data(), b.data(), m, k, n, false);
        CHECK(max_abs_diff(want, got) < 1e-14);
    }
}

TEST_CASE("accumulate adds onto the destination") {
    Rng rng(12);
    const auto a = random_vec(6, rng), b = random_vec(6, rng);
    std::vector<double> c0, c(4, 1.0);
    naive_nn(c0, a, b, 2, 3, 2);
    kernels::scalar::matmul_nn(c.data(), a.data(), b.data(), 2, 3, 2, true);
    for (int i = 0; i < 4; ++i) CHECK(c[i] == doctest::Approx(1.0 + c0[i]).epsilon(1e-14));
}

TEST_CASE("dispatched kernels agree with the scalar reference") {
    // SIMD reassociates sums, so agreement is to relative tolerance, not bitwise
    Rng rng(13);
    INFO("active isa: " << kernels::isa_name(kernels::active_isa()));
    for (std::size_t n : {1u, 2u, 3u, 4u, 7u, 8u, 17u, 63u, 64u, 65u, 200u}) {
        const auto a = random_vec(n, rng), b = random_vec(n, rng);
        CHECK(rel_err(kernels::dot(a.data(), b.data(), n), kernels::scalar::dot(a.data(), b.data(), n)) <
              1e-13);
        std::vector<double> x(n), y(n);
        kernels::add(x.data(), a.data(), b.data(), n);
        kernels::scalar::add(y.data(), a.data(), b.data(), n);
        CHECK(max_abs_diff(x, y) == 0.0);
        kernels::sub(x.data(), a.data(), b.data(), n);
        kernels::scalar::sub(y.data(), a.data(), b.data(), n);
        CHECK(max_abs_diff(x, y) == 0.0);
        kernels::mul(x.data(), a.data(), b.data(), n);
        kernels::scalar::mul(y.data(), a.data(), b.data(), n);
        CHECK(max_abs_diff(x, y) == 0.0);
        kernels::scale(x.data(), a.data(), 1.7, n);
        kernels::scalar::scale(y.data(), a.data(), 1.7, n);
        CHECK(max_abs_diff(x, y) == 0.0);
        std::fill(x.begin(), x.end(), 0.5);
        std::fill(y.begin(), y.end(), 0.5);
        kernels::axpy(x.data(), a.data(), -0.3, n);
        kernels::scalar::axpy(y.data(), a.data(), -0.3, n);
        CHECK(max_abs_diff(x, y) < 1e-15);
    }
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t m = 1 + rng.below(20), k = 1 + rng.below(70), n = 1 + rng.below(20);
        const auto a = random_vec(m * k, rng);
        std::vector<double> got(m * n), want(m * n);
        const auto b_nn = random_vec(k * n, rng);
        kernels::matmul_nn(got.data(), a.data(), b_nn.data(), m, k, n, false);
        kernels::scalar::matmul_nn(want.data(), a.data(), b_nn.data(), m, k, n, false);
        CHECK(max_rel_diff(got, want) < 1e-9);
        const auto b_nt = random_vec(n * k, rng);
        kernels::matmul_nt(got.data(), a.data(), b_nt.data(), m, k, n, false);
        kernels::scalar::matmul_nt(want.data(), a.data(), b_nt.data(), m, k, n, false);
        CHECK(max_rel_diff(got, want) < 1e-9);
        const auto a_tn = random_vec(k * m, rng);
        const auto b_tn = random_vec(k * n, rng);
        kernels::matmul_tn(got.data(), a_tn.data(), b_tn.data(), m, k, n, false);
        kernels::scalar::matmul_tn(want.data(), a_tn.data(), b_tn.data(), m, k, n, false);
        CHECK(max_rel_diff(got, want) < 1e-9);
    }
}
