#pragma once

#include <cstddef>
#include <string>

namespace asyncra::kernels {

// Data-parallel inner loops used by the decoder, demappers and density
// evolution. Every operation has a portable scalar reference implementation
// and, on x86-64 with AVX2, a vectorized variant. The active backend is
// chosen once at startup (cpuid), overridable with ASYNC_RA_KERNELS=scalar
// or =avx2. Scalar and AVX2 variants are equivalence-tested against each
// other; transcendental kernels agree to a few ulp, the rest bit-exactly.

struct Ops {
    // dst[i] = a * src[i]
    void (*scale)(double* dst, const double* src, double a, std::size_t n);
    // v[i] = clamp(v[i], lo, hi)
    void (*clamp)(double* v, double lo, double hi, std::size_t n);
    // dst[i] = tanh(0.5 * src[i])
    void (*tanh_half)(double* dst, const double* src, std::size_t n);
    // dst[i] = log((1 + src[i]) / (1 - src[i])), src in (-1, 1)
    void (*atanh2)(double* dst, const double* src, std::size_t n);
    // dst[i] = exp(src[i])
    void (*vexp)(double* dst, const double* src, std::size_t n);
    // interleaved complex accumulate: dst[i] += (c + i s) * src[i], arrays of
    // n complex values stored re,im,re,im,...
    void (*rotate_acc)(double* dst, const double* src, double c, double s,
                       std::size_t n);
    // sum of elements
    double (*sum)(const double* v, std::size_t n);
};

const Ops& scalar_ops();

#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();
bool avx2_supported();
#endif

// Backend selected from cpuid and the ASYNC_RA_KERNELS environment variable.
const Ops& active();
std::string active_name();

} // namespace asyncra::kernels
