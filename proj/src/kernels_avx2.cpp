// AVX2+FMA variants, compiled with -mavx2 -mfma on x86 only.
// Reassociated accumulation: results agree with the scalar path to
// rounding, not bitwise; equivalence tests use a relative tolerance.

#include "cria/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstring>

namespace cria::kernels::avx2 {

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    __m128d s2 = _mm_add_pd(lo, hi);
    double s = _mm_cvtsd_f64(_mm_add_sd(s2, _mm_unpackhi_pd(s2, s2)));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double* out, const double* a, double s, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), vs, _mm256_loadu_pd(out + i));
        _mm256_storeu_pd(out + i, r);
    }
    for (; i < n; ++i) out[i] += a[i] * s;
}

void matmul_nn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        std::size_t p = 0;
        // two k-steps per pass to cut load traffic on the C row
        for (; p + 2 <= k; p += 2) {
            const __m256d a0 = _mm256_set1_pd(arow[p]);
            const __m256d a1 = _mm256_set1_pd(arow[p + 1]);
            const double* b0 = b + p * n;
            const double* b1 = b0 + n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d r = _mm256_loadu_pd(crow + j);
                r = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), r);
                r = _mm256_fmadd_pd(a1, _mm256_loadu_pd(b1 + j), r);
                _mm256_storeu_pd(crow + j, r);
            }
            for (; j < n; ++j) crow[j] += arow[p] * b0[j] + arow[p + 1] * b1[j];
        }
        for (; p < k; ++p) axpy(crow, b + p * n, arow[p], n);
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
        for (std::size_t i = 0; i < m; ++i) axpy(c + i * n, brow, arow[i], n);
    }
}

void add(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(double* out, const double* a, double s, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] * s;
}

}  // namespace cria::kernels::avx2

#endif  // x86_64
