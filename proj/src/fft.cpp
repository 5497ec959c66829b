#include "tdn/fft.hpp"

#include <cmath>

namespace tdn {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void fft_pow2(std::vector<cd>& a, bool inverse) {
    const int n = static_cast<int>(a.size());
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * kPi / len * (inverse ? 1.0 : -1.0);
        cd wlen(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                cd u = a[i + j];
                cd t = a[i + j + len / 2] * w;
                a[i + j] = u + t;
                a[i + j + len / 2] = u - t;
                w *= wlen;
            }
        }
    }
}

// Bluestein chirp-z transform: DFT of arbitrary length via a power-of-two
// circular convolution.
void fft_bluestein(std::vector<cd>& a, bool inverse) {
    const int n = static_cast<int>(a.size());
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<cd> chirp(n);
    for (int k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the phase argument small
        long long k2 = (static_cast<long long>(k) * k) % (2LL * n);
        double ang = sign * kPi * static_cast<double>(k2) / n;
        chirp[k] = cd(std::cos(ang), std::sin(ang));
    }
    int m = next_pow2(2 * n - 1);
    std::vector<cd> fa(m, cd(0, 0)), fb(m, cd(0, 0));
    for (int k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fb[0] = std::conj(chirp[0]);
    for (int k = 1; k < n; ++k) fb[k] = fb[m - k] = std::conj(chirp[k]);
    fft_pow2(fa, false);
    fft_pow2(fb, false);
    for (int i = 0; i < m; ++i) fa[i] *= fb[i];
    fft_pow2(fa, true);
    double inv_m = 1.0 / m;
    for (int k = 0; k < n; ++k) a[k] = fa[k] * inv_m * chirp[k];
}

}  // namespace

void fft(std::vector<cd>& a, bool inverse) {
    const int n = static_cast<int>(a.size());
    if (n <= 1) return;
    if ((n & (n - 1)) == 0)
        fft_pow2(a, inverse);
    else
        fft_bluestein(a, inverse);
}

std::vector<cd> dft2(const Mat& m) {
    const int h = m.rows, w = m.cols;
    std::vector<cd> spec(static_cast<size_t>(h) * w);
    std::vector<cd> row(w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) row[c] = cd(m.at(r, c), 0.0);
        fft(row, false);
        for (int c = 0; c < w; ++c) spec[static_cast<size_t>(r) * w + c] = row[c];
    }
    std::vector<cd> col(h);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) col[r] = spec[static_cast<size_t>(r) * w + c];
        fft(col, false);
        for (int r = 0; r < h; ++r) spec[static_cast<size_t>(r) * w + c] = col[r];
    }
    return spec;
}

Mat idft2_real(const std::vector<cd>& spec, int h, int w) {
    check(spec.size() == static_cast<size_t>(h) * w, "idft2_real: size mismatch");
    std::vector<cd> tmp(spec);
    std::vector<cd> row(w), col(h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) row[c] = tmp[static_cast<size_t>(r) * w + c];
        fft(row, true);
        for (int c = 0; c < w; ++c) tmp[static_cast<size_t>(r) * w + c] = row[c];
    }
    Mat out(h, w);
    const double norm = 1.0 / (static_cast<double>(h) * w);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) col[r] = tmp[static_cast<size_t>(r) * w + c];
        fft(col, true);
        for (int r = 0; r < h; ++r) out.at(r, c) = col[r].real() * norm;
    }
    return out;
}

}  // namespace tdn
