// AVX2 kernel variants. This translation unit is the only one compiled with
// -mavx2; entry is guarded by the runtime cpuid check in kernels.cpp.

#if defined(__x86_64__) || defined(_M_X64)

#include "asyncra/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <immintrin.h>

namespace asyncra::kernels {

namespace {

inline __m256d poly_eval(__m256d x, const double* c, int deg) {
    __m256d acc = _mm256_set1_pd(c[deg]);
    for (int i = deg - 1; i >= 0; --i)
        acc = _mm256_add_pd(_mm256_mul_pd(acc, x), _mm256_set1_pd(c[i]));
    return acc;
}

// int64 lanes (|v| < 2^51) to double via the 2^52 magic-number trick
inline __m256d i64_to_pd(__m256i v) {
    const __m256i magic = _mm256_set1_epi64x(0x4330000000000000ll); // 2^52
    return _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(v, magic)),
                         _mm256_castsi256_pd(magic));
}

// exp(x) via Cody-Waite range reduction x = n*ln2 + r, |r| <= ln2/2, and a
// degree-13 Taylor kernel (truncation error < 1 ulp on the reduced range).
inline __m256d exp_pd(__m256d x) {
    static const double kTaylor[14] = {
        1.0,          1.0,           1.0 / 2,        1.0 / 6,
        1.0 / 24,     1.0 / 120,     1.0 / 720,      1.0 / 5040,
        1.0 / 40320,  1.0 / 362880,  1.0 / 3628800,  1.0 / 39916800,
        1.0 / 479001600, 1.0 / 6227020800.0,
    };
    const __m256d inv_ln2 = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d max_x = _mm256_set1_pd(709.0);
    const __m256d min_x = _mm256_set1_pd(-745.0);

    __m256d xi = _mm256_min_pd(_mm256_max_pd(x, min_x), max_x);
    __m256d nf = _mm256_round_pd(_mm256_mul_pd(xi, inv_ln2),
                                 _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_sub_pd(xi, _mm256_mul_pd(nf, ln2_hi));
    r = _mm256_sub_pd(r, _mm256_mul_pd(nf, ln2_lo));

    __m256d p = poly_eval(r, kTaylor, 13);

    // 2^n by exponent-field construction; valid for biased exponent >= 1,
    // i.e. x >= -708.4. Anything below is flushed to zero.
    __m128i n32 = _mm256_cvtpd_epi32(nf);
    __m256i n64 = _mm256_cvtepi32_epi64(n32);
    __m256i biased = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
    __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
    __m256d out = _mm256_mul_pd(p, scale);

    __m256d under = _mm256_cmp_pd(x, _mm256_set1_pd(-708.0), _CMP_LT_OQ);
    out = _mm256_andnot_pd(under, out);
    __m256d over = _mm256_cmp_pd(x, max_x, _CMP_GT_OQ);
    out = _mm256_blendv_pd(out, _mm256_set1_pd(HUGE_VAL), over);
    return out;
}

// log(x) for finite positive x: split into 2^e * m with m in [sqrt(1/2),
// sqrt(2)), then the atanh series log m = 2 atanh((m-1)/(m+1)).
inline __m256d log_pd(__m256d x) {
    const __m256i exp_mask = _mm256_set1_epi64x(0x7ff0000000000000ll);
    const __m256i mant_mask = _mm256_set1_epi64x(0x000fffffffffffffll);
    const __m256i one_bits = _mm256_set1_epi64x(0x3ff0000000000000ll);

    __m256i bits = _mm256_castpd_si256(x);
    __m256i e_raw = _mm256_srli_epi64(_mm256_and_si256(bits, exp_mask), 52);
    __m256d m = _mm256_castsi256_pd(
        _mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));

    const __m256d sqrt2 = _mm256_set1_pd(1.4142135623730951);
    __m256d ge = _mm256_cmp_pd(m, sqrt2, _CMP_GE_OQ);
    m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), ge);

    __m256d e_dbl = _mm256_sub_pd(i64_to_pd(e_raw), _mm256_set1_pd(1023.0));
    // mask AND 1.0 adds one where the mantissa was halved
    e_dbl = _mm256_add_pd(e_dbl, _mm256_and_pd(ge, _mm256_set1_pd(1.0)));

    __m256d s = _mm256_div_pd(_mm256_sub_pd(m, _mm256_set1_pd(1.0)),
                              _mm256_add_pd(m, _mm256_set1_pd(1.0)));
    __m256d s2 = _mm256_mul_pd(s, s);
    static const double kAtanh[9] = {
        2.0,      2.0 / 3,  2.0 / 5,  2.0 / 7, 2.0 / 9,
        2.0 / 11, 2.0 / 13, 2.0 / 15, 2.0 / 17,
    };
    __m256d series = _mm256_mul_pd(s, poly_eval(s2, kAtanh, 8));

    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    return _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(e_dbl, ln2_hi), series),
        _mm256_mul_pd(e_dbl, ln2_lo));
}

void scale_avx2(double* dst, const double* src, double a, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_mul_pd(av, _mm256_loadu_pd(src + i)));
    for (; i < n; ++i) dst[i] = a * src[i];
}

void clamp_avx2(double* v, double lo, double hi, std::size_t n) {
    const __m256d lov = _mm256_set1_pd(lo), hiv = _mm256_set1_pd(hi);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d x = _mm256_loadu_pd(v + i);
        _mm256_storeu_pd(v + i, _mm256_min_pd(_mm256_max_pd(x, lov), hiv));
    }
    for (; i < n; ++i) v[i] = v[i] < lo ? lo : (v[i] > hi ? hi : v[i]);
}

void tanh_half_avx2(double* dst, const double* src, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d t = exp_pd(_mm256_loadu_pd(src + i));
        _mm256_storeu_pd(
            dst + i, _mm256_div_pd(_mm256_sub_pd(t, one), _mm256_add_pd(t, one)));
    }
    for (; i < n; ++i) {
        const double t = std::exp(src[i]);
        dst[i] = (t - 1.0) / (t + 1.0);
    }
}

void atanh2_avx2(double* dst, const double* src, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d p = _mm256_loadu_pd(src + i);
        __m256d q = _mm256_div_pd(_mm256_add_pd(one, p), _mm256_sub_pd(one, p));
        _mm256_storeu_pd(dst + i, log_pd(q));
    }
    for (; i < n; ++i) dst[i] = std::log((1.0 + src[i]) / (1.0 - src[i]));
}

void vexp_avx2(double* dst, const double* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i, exp_pd(_mm256_loadu_pd(src + i)));
    for (; i < n; ++i) dst[i] = std::exp(src[i]);
}

void rotate_acc_avx2(double* dst, const double* src, double c, double s,
                     std::size_t n) {
    // [c*re - s*im, c*im + s*re]; same products and adds as the scalar path,
    // so results are bit-identical.
    const __m256d cv = _mm256_set1_pd(c);
    const __m256d sv = _mm256_setr_pd(-s, s, -s, s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d x = _mm256_loadu_pd(src + 2 * i);
        __m256d sw = _mm256_permute_pd(x, 0b0101);
        __m256d rot = _mm256_add_pd(_mm256_mul_pd(cv, x), _mm256_mul_pd(sv, sw));
        _mm256_storeu_pd(dst + 2 * i,
                         _mm256_add_pd(_mm256_loadu_pd(dst + 2 * i), rot));
    }
    for (; i < n; ++i) {
        const double re = src[2 * i], im = src[2 * i + 1];
        dst[2 * i] += c * re - s * im;
        dst[2 * i + 1] += c * im + s * re;
    }
}

double sum_avx2(const double* v, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(v + i));
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    __m128d s2 = _mm_add_pd(lo, hi);
    double out = _mm_cvtsd_f64(_mm_add_sd(s2, _mm_unpackhi_pd(s2, s2)));
    for (; i < n; ++i) out += v[i];
    return out;
}

} // namespace

const Ops& avx2_ops() {
    static const Ops ops{scale_avx2, clamp_avx2, tanh_half_avx2, atanh2_avx2,
                         vexp_avx2, rotate_acc_avx2, sum_avx2};
    return ops;
}

} // namespace asyncra::kernels

#endif // x86-64
