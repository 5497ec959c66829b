#include <doctest.h>

#include <cmath>

#include "tdn/fft.hpp"
#include "tdn/rng.hpp"

using namespace tdn;

namespace {

Mat random_mat(int h, int w, uint64_t seed) {
    Mat m(h, w);
    Rng rng(seed);
    for (auto& x : m.v) x = rng.uniform(-1, 1);
    return m;
}

// Quadratic-time reference DFT.
std::vector<cd> dft_naive(const std::vector<cd>& a, bool inverse) {
    const int n = static_cast<int>(a.size());
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<cd> out(n);
    for (int k = 0; k < n; ++k) {
        cd acc(0, 0);
        for (int j = 0; j < n; ++j) {
            double ang = sign * 2.0 * M_PI * k * j / n;
            acc += a[j] * cd(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

}  // namespace

TEST_CASE("fft matches naive DFT for pow2 and non-pow2 lengths") {
    Rng rng(5);
    for (int n : {1, 2, 8, 12, 15, 64, 111}) {
        std::vector<cd> a(n);
        for (auto& x : a) x = cd(rng.uniform(-1, 1), rng.uniform(-1, 1));
        auto ref = dft_naive(a, false);
        auto got = a;
        fft(got, false);
        for (int i = 0; i < n; ++i) CHECK(std::abs(got[i] - ref[i]) < 1e-9 * n);
        fft(got, true);
        for (int i = 0; i < n; ++i) CHECK(std::abs(got[i] / double(n) - a[i]) < 1e-9 * n);
    }
}

TEST_CASE("dft2 of constant matrix has only a DC coefficient") {
    const int h = 6, w = 8;
    Mat m(h, w, 0.37);
    auto spec = dft2(m);
    CHECK(spec[0].real() == doctest::Approx(0.37 * h * w).epsilon(1e-12));
    CHECK(std::abs(spec[0].imag()) < 1e-10);
    for (size_t i = 1; i < spec.size(); ++i) CHECK(std::abs(spec[i]) < 1e-10);
}

TEST_CASE("dft2 of unit impulse at origin is all ones") {
    Mat m(4, 4);
    m.at(0, 0) = 1.0;
    auto spec = dft2(m);
    for (const auto& c : spec) {
        CHECK(c.real() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(c.imag()) < 1e-12);
    }
}

TEST_CASE("Parseval identity on random 16x16 input") {
    Mat m = random_mat(16, 16, 11);
    auto spec = dft2(m);
    double space = 0, freq = 0;
    for (double x : m.v) space += x * x;
    for (const auto& c : spec) freq += std::norm(c);
    CHECK(freq / (16.0 * 16.0) == doctest::Approx(space).epsilon(1e-6));
}

TEST_CASE("idft2_real inverts dft2, including odd sizes") {
    for (auto [h, w] : {std::pair{8, 8}, {7, 9}, {16, 12}, {111, 13}}) {
        Mat m = random_mat(h, w, 1000 + h * 31 + w);
        Mat back = idft2_real(dft2(m), h, w);
        double worst = 0;
        for (size_t i = 0; i < m.v.size(); ++i) worst = std::max(worst, std::abs(m.v[i] - back.v[i]));
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("dft2 of real input is Hermitian-symmetric") {
    const int h = 12, w = 10;
    Mat m = random_mat(h, w, 21);
    auto spec = dft2(m);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            cd a = spec[static_cast<size_t>(u) * w + v];
            cd b = spec[static_cast<size_t>((h - u) % h) * w + (w - v) % w];
            CHECK(std::abs(a - std::conj(b)) < 1e-6);
        }
}
