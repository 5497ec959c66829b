#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

namespace tdn {

// Cephes-style double exp (rational approximation + exponent scaling),
// accurate to a few ulp. Branch-light so hot loops vectorize; used where
// exp dominates the profile (attention scores, softmax).
inline double fast_exp(double x) {
    if (x < -708.0) return 0.0;
    if (x > 708.0) return std::numeric_limits<double>::infinity();
    constexpr double log2e = 1.4426950408889634074;
    constexpr double c1 = 6.93145751953125e-1;       // ln2 high part
    constexpr double c2 = 1.42860682030941723212e-6; // ln2 low part
    constexpr double p0 = 1.26177193074810590878e-4;
    constexpr double p1 = 3.02994407707441961300e-2;
    constexpr double p2 = 9.99999999999999999910e-1;
    constexpr double q0 = 3.00198505138664455042e-6;
    constexpr double q1 = 2.52448340349684104192e-3;
    constexpr double q2 = 2.27265548208155028766e-1;
    constexpr double q3 = 2.00000000000000000005e0;

    const double n = std::nearbyint(x * log2e);
    const double f = (x - n * c1) - n * c2;
    const double f2 = f * f;
    const double p = f * (p2 + f2 * (p1 + f2 * p0));
    const double q = q3 + f2 * (q2 + f2 * (q1 + f2 * q0));
    const double r = 1.0 + 2.0 * p / (q - p);

    // scale by 2^n through the exponent bits
    const int64_t bits = (static_cast<int64_t>(n) + 1023) << 52;
    double scale;
    std::memcpy(&scale, &bits, 8);
    return r * scale;
}

// out[i] = exp(in[i] - shift) over a contiguous span. AVX2 path processes
// four lanes at a time; tails fall back to the scalar routine.
void exp_span(const double* in, double* out, int n, double shift);

}  // namespace tdn
