#include "cria/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace cria {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<std::complex<double>>& x, bool inverse) {
    const std::size_t n = x.size();
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const auto u = x[i + j];
                const auto v = x[i + j + len / 2] * w;
                x[i + j] = u + v;
                x[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& v : x) v /= static_cast<double>(n);
}

// Bluestein's algorithm: length-n DFT as a circular convolution of
// chirp-modulated sequences, evaluated with a padded radix-2 FFT.
void fft_bluestein(std::vector<std::complex<double>>& x, bool inverse) {
    const std::size_t n = x.size();
    std::size_t m = 1;
    while (m < 2 * n + 1) m <<= 1;

    std::vector<std::complex<double>> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // angle = pi * k^2 / n, k^2 reduced mod 2n to keep precision
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = (inverse ? 1.0 : -1.0) * kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = {std::cos(ang), std::sin(ang)};
    }

    std::vector<std::complex<double>> a(m, {0.0, 0.0}), b(m, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);

    fft_radix2(a, false);
    fft_radix2(b, false);
    for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
    fft_radix2(a, true);

    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
    if (inverse)
        for (auto& v : x) v /= static_cast<double>(n);
}

}  // namespace

void fft(std::vector<std::complex<double>>& x, bool inverse) {
    if (x.empty()) throw std::invalid_argument("fft: empty input");
    if (x.size() == 1) return;
    if (is_pow2(x.size()))
        fft_radix2(x, inverse);
    else
        fft_bluestein(x, inverse);
}

std::vector<double> fft_magnitude(const std::vector<double>& x) {
    std::vector<std::complex<double>> c(x.begin(), x.end());
    fft(c);
    std::vector<double> mag(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mag[i] = std::abs(c[i]);
    return mag;
}

}  // namespace cria
