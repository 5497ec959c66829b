#pragma once

#include <complex>
#include <vector>

#include "tdn/mat.hpp"

namespace tdn {

using cd = std::complex<double>;

// In-place DFT of arbitrary length, unnormalized in both directions.
// Radix-2 Cooley-Tukey for powers of two, Bluestein otherwise.
void fft(std::vector<cd>& a, bool inverse);

// 2D DFT, unnormalized forward convention; row-major h x w result.
std::vector<cd> dft2(const Mat& m);

// Inverse 2D DFT with 1/(h*w) normalization; returns the real part.
Mat idft2_real(const std::vector<cd>& spec, int h, int w);

inline int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace tdn
