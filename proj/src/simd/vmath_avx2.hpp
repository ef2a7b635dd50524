#pragma once
// Double-precision exp/log on __m256d. Compiled only into AVX2+FMA units.

#include <immintrin.h>

#include <cstdint>

namespace distkm::simd::avx2 {

inline __m256d vexp(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d lo_cut = _mm256_set1_pd(-708.0);
    const __m256d hi_cut = _mm256_set1_pd(709.0);

    __m256d underflow = _mm256_cmp_pd(x, lo_cut, _CMP_LT_OQ);
    x = _mm256_min_pd(_mm256_max_pd(x, lo_cut), hi_cut);

    __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
    r = _mm256_fnmadd_pd(n, ln2_lo, r);

    // Taylor series to degree 13 on |r| <= ln2/2; truncation < 1e-17 relative
    __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

    // 2^n: n is integral and within [-1022, 1023] after the clamps
    __m128i n32 = _mm256_cvtpd_epi32(n);
    __m256i n64 = _mm256_cvtepi32_epi64(n32);
    __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
    __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
    return _mm256_andnot_pd(underflow, result);
}

/// Natural log for positive normal inputs.
inline __m256d vlog(__m256d x) {
    const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
    const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
    const __m256d sqrt2 = _mm256_set1_pd(1.4142135623730951);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d two52 = _mm256_set1_pd(4503599627370496.0);
    const __m256d one = _mm256_set1_pd(1.0);

    __m256i xi = _mm256_castpd_si256(x);
    // exponent as an exact double via the 2^52 magic-number trick
    __m256i exp_bits = _mm256_srli_epi64(xi, 52);
    __m256d e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(exp_bits, _mm256_castpd_si256(two52))), two52);
    e = _mm256_sub_pd(e, _mm256_set1_pd(1023.0));
    __m256d m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(xi, mant_mask), one_bits));

    __m256d big = _mm256_cmp_pd(m, sqrt2, _CMP_GT_OQ);
    m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
    e = _mm256_add_pd(e, _mm256_and_pd(big, one));

    __m256d f = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
    __m256d s = _mm256_mul_pd(f, f);
    // 2 atanh(f) = 2 (f + f^3/3 + f^5/5 + ...), |f| <= 0.1716
    __m256d p = _mm256_set1_pd(1.0 / 25.0);
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 23.0));
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 21.0));
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 19.0));
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 17.0));
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 15.0));
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 13.0));
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 11.0));
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 9.0));
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 7.0));
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 5.0));
    p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 3.0));
    __m256d tail = _mm256_mul_pd(_mm256_mul_pd(f, s), p);  // f^3/3 + ...
    __m256d log_m = _mm256_fmadd_pd(_mm256_set1_pd(2.0), tail, _mm256_add_pd(f, f));
    return _mm256_add_pd(_mm256_fmadd_pd(e, ln2_hi, log_m), _mm256_mul_pd(e, ln2_lo));
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

}  // namespace distkm::simd::avx2
