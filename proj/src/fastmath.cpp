#include "tdn/fastmath.hpp"

#ifdef __AVX2__
#include <immintrin.h>
#endif

namespace tdn {

#ifdef __AVX2__

namespace {

inline __m256d exp4(__m256d x) {
    const __m256d lo = _mm256_set1_pd(-708.0), hi = _mm256_set1_pd(708.0);
    x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 1.5 * 2^52
    const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);

    __m256d t = _mm256_fmadd_pd(x, log2e, magic);
    const __m256d n = _mm256_sub_pd(t, magic);  // nearest integer as double
    // f = x - n*ln2, split for accuracy
    __m256d f = _mm256_fnmadd_pd(n, c1, x);
    f = _mm256_fnmadd_pd(n, c2, f);
    const __m256d f2 = _mm256_mul_pd(f, f);

    const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
    const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
    const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
    const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
    const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
    const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
    const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);

    __m256d p = _mm256_fmadd_pd(f2, p0, p1);
    p = _mm256_fmadd_pd(f2, p, p2);
    p = _mm256_mul_pd(p, f);
    __m256d q = _mm256_fmadd_pd(f2, q0, q1);
    q = _mm256_fmadd_pd(f2, q, q2);
    q = _mm256_fmadd_pd(f2, q, q3);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d r =
        _mm256_fmadd_pd(two, _mm256_div_pd(p, _mm256_sub_pd(q, p)), one);

    // 2^n via the exponent field; the magic-add left n in t's low bits
    const __m256i nbits = _mm256_sub_epi64(_mm256_castpd_si256(t), _mm256_castpd_si256(magic));
    const __m256i expo =
        _mm256_slli_epi64(_mm256_add_epi64(nbits, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(r, _mm256_castsi256_pd(expo));
}

}  // namespace

void exp_span(const double* in, double* out, int n, double shift) {
    const __m256d sh = _mm256_set1_pd(shift);
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, exp4(_mm256_sub_pd(_mm256_loadu_pd(in + i), sh)));
    for (; i < n; ++i) out[i] = fast_exp(in[i] - shift);
}

#else

void exp_span(const double* in, double* out, int n, double shift) {
    for (int i = 0; i < n; ++i) out[i] = fast_exp(in[i] - shift);
}

#endif

}  // namespace tdn
