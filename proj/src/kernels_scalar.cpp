#include "cria/kernels.hpp"

#include <cstring>

namespace cria::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void matmul_nn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot(arow, b + j * k, k);
            if (accumulate) crow[j] += v; else crow[j] = v;
        }
    }
}

void matmul_tn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void add(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(double* out, const double* a, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpy(double* out, const double* a, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * s;
}

}  // namespace cria::kernels::scalar
