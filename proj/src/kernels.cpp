#include "asyncra/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#if defined(__x86_64__) || defined(_M_X64)
#include <cpuid.h>
#endif

namespace asyncra::kernels {

namespace {

void scale_scalar(double* dst, const double* src, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a * src[i];
}

void clamp_scalar(double* v, double lo, double hi, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = std::min(std::max(v[i], lo), hi);
}

void tanh_half_scalar(double* dst, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = std::tanh(0.5 * src[i]);
}

void atanh2_scalar(double* dst, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        dst[i] = std::log((1.0 + src[i]) / (1.0 - src[i]));
}

void vexp_scalar(double* dst, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = std::exp(src[i]);
}

void rotate_acc_scalar(double* dst, const double* src, double c, double s,
                       std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double re = src[2 * i], im = src[2 * i + 1];
        dst[2 * i] += c * re - s * im;
        dst[2 * i + 1] += c * im + s * re;
    }
}

double sum_scalar(const double* v, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += v[i];
    return acc;
}

} // namespace

const Ops& scalar_ops() {
    static const Ops ops{scale_scalar, clamp_scalar, tanh_half_scalar,
                         atanh2_scalar, vexp_scalar, rotate_acc_scalar,
                         sum_scalar};
    return ops;
}

#if defined(__x86_64__) || defined(_M_X64)
bool avx2_supported() {
    unsigned eax = 0, ebx = 0, ecx = 0, edx = 0;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    return (ebx & (1u << 5)) != 0; // AVX2
}
#endif

namespace {

const Ops& select() {
    const char* env = std::getenv("ASYNC_RA_KERNELS");
#if defined(__x86_64__) || defined(_M_X64)
    if (env != nullptr) {
        const std::string want(env);
        if (want == "scalar") return scalar_ops();
        if (want == "avx2") {
            if (!avx2_supported())
                throw std::runtime_error("ASYNC_RA_KERNELS=avx2 but CPU lacks AVX2");
            return avx2_ops();
        }
        if (want != "auto")
            throw std::runtime_error("ASYNC_RA_KERNELS must be scalar, avx2 or auto");
    }
    return avx2_supported() ? avx2_ops() : scalar_ops();
#else
    if (env != nullptr) {
        const std::string want(env);
        if (want != "scalar" && want != "auto")
            throw std::runtime_error("only scalar kernels available on this arch");
    }
    return scalar_ops();
#endif
}

} // namespace

const Ops& active() {
    static const Ops& ops = select();
    return ops;
}

std::string active_name() {
#if defined(__x86_64__) || defined(_M_X64)
    return &active() == &scalar_ops() ? "scalar" : "avx2";
#else
    return "scalar";
#endif
}

} // namespace asyncra::kernels
