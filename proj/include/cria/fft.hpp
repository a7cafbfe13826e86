#pragma once

#include <complex>
#include <vector>

namespace cria {

// In-place forward DFT. Radix-2 when n is a power of two, Bluestein
// otherwise. No scaling on the forward transform.
void fft(std::vector<std::complex<double>>& x, bool inverse = false);

// |DFT(x)| per bin, length preserved (two-sided spectrum).
std::vector<double> fft_magnitude(const std::vector<double>& x);

}  // namespace cria
