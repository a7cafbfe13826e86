// NEON variants for aarch64. float64x2 lanes; same contracts as scalar.

#include "cria/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstring>

namespace cria::kernels::neon {

double dot(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double* out, const double* a, double s, std::size_t n) {
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vfmaq_f64(vld1q_f64(out + i), vld1q_f64(a + i), vs));
    for (; i < n; ++i) out[i] += a[i] * s;
}

void matmul_nn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p)
            axpy(c + i * n, b + p * n, a[i * k + p], n);
}

void matmul_nt(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot(a + i * k, b + j * k, k);
            if (accumulate) c[i * n + j] += v; else c[i * n + j] = v;
        }
}

void matmul_tn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i)
            axpy(c + i * n, b + p * n, a[p * m + i], n);
}

void add(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(double* out, const double* a, double s, std::size_t n) {
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] * s;
}

}  // namespace cria::kernels::neon

#endif  // __aarch64__
