#include "asyncra/channel.hpp"

#include "asyncra/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace asyncra::channel {

namespace {
constexpr double kPi = 3.14159265358979323846;

double logsumexp2(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}
} // namespace

const std::array<cplx, 4>& QpskConstellation::points() {
    static const std::array<cplx, 4> pts = {
        cplx(kAmp, kAmp),   // S1, label 00
        cplx(-kAmp, kAmp),  // S2, label 01
        cplx(-kAmp, -kAmp), // S3, label 11
        cplx(kAmp, -kAmp),  // S4, label 10
    };
    return pts;
}

std::pair<int, int> QpskConstellation::label(std::size_t i) {
    static constexpr std::pair<int, int> labels[4] = {
        {0, 0}, {0, 1}, {1, 1}, {1, 0}};
    return labels[i];
}

cplx QpskConstellation::map(int bit1, int bit2) {
    // bit1 flips the imaginary sign, bit2 the real sign
    return {bit2 ? -kAmp : kAmp, bit1 ? -kAmp : kAmp};
}

std::vector<cplx> qpsk_modulate(std::span<const std::uint8_t> bits) {
    if (bits.size() % 2 != 0)
        throw std::invalid_argument("qpsk_modulate: odd number of bits");
    std::vector<cplx> out(bits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = QpskConstellation::map(bits[2 * i], bits[2 * i + 1]);
    return out;
}

SymbolTimeline superpose(std::span<const ReplicaSignal> replicas,
                         std::size_t window_len, double sigma_n2, Rng& rng) {
    SymbolTimeline tl;
    tl.sigma_n2 = sigma_n2;
    tl.samples.assign(window_len, cplx(0.0, 0.0));
    tl.count.assign(window_len, 0);

    const double sigma = std::sqrt(sigma_n2);
    for (auto& s : tl.samples)
        s = cplx(sigma * rng.normal(), sigma * rng.normal());

    const auto& k = kernels::active();
    for (const auto& r : replicas) {
        if (r.start + r.symbols.size() > window_len)
            throw std::invalid_argument("superpose: replica exceeds window");
        k.rotate_acc(reinterpret_cast<double*>(tl.samples.data() + r.start),
                     reinterpret_cast<const double*>(r.symbols.data()),
                     std::cos(r.phase), std::sin(r.phase), r.symbols.size());
        for (std::size_t i = 0; i < r.symbols.size(); ++i)
            ++tl.count[r.start + i];
    }
    return tl;
}

std::pair<double, double> llr_gaussian(cplx y, double sigma2) {
    if (!(sigma2 > 0.0))
        throw std::invalid_argument("llr_gaussian: sigma2 must be positive");
    // Gray factorization: bit 1 rides on Im(y), bit 2 on Re(y); signal
    // coordinate +-1/sqrt(2), so L = 2*(1/sqrt(2))*coord/sigma2.
    const double scale = 2.0 * QpskConstellation::kAmp / sigma2;
    return {scale * y.imag(), scale * y.real()};
}

std::pair<double, double> llr_single_interferer(cplx y, double dphi,
                                                double deps, double sigma_n2) {
    if (!(sigma_n2 > 0.0))
        throw std::invalid_argument("llr: sigma_n2 must be positive");
    const auto& pts = QpskConstellation::points();
    const cplx rot = std::polar(1.0, dphi);
    const double inv2s = 1.0 / (2.0 * sigma_n2);

    // metrics[i] = log sum over interferer pairs of exp(-|y - S_i - I|^2 /
    // (2 sigma_n^2)), I = rot * (deps * S_prev + (1 - deps) * S_cur)
    double metrics[4];
    for (int i = 0; i < 4; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (int kp = 0; kp < 4; ++kp)
            for (int kc = 0; kc < 4; ++kc) {
                const cplx interf =
                    rot * (deps * pts[kp] + (1.0 - deps) * pts[kc]);
                const double e = -std::norm(y - pts[i] - interf) * inv2s;
                m = logsumexp2(m, e);
            }
        metrics[i] = m;
    }
    const double l1 = logsumexp2(metrics[0], metrics[1]) -
                      logsumexp2(metrics[2], metrics[3]);
    const double l2 = logsumexp2(metrics[0], metrics[3]) -
                      logsumexp2(metrics[1], metrics[2]);
    return {l1, l2};
}

namespace {

// trapezoid over the uniform interferer phase with n nodes
std::pair<double, double> random_phase_quadrature(cplx y, double sigma_n2,
                                                  std::size_t n) {
    const auto& pts = QpskConstellation::points();
    const double inv2s = 1.0 / (2.0 * sigma_n2);
    double metrics[4];
    for (int i = 0; i < 4; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < 4; ++k)
            for (std::size_t q = 0; q < n; ++q) {
                const double theta = -kPi + 2.0 * kPi * static_cast<double>(q) /
                                                static_cast<double>(n);
                const cplx interf = pts[k] * std::polar(1.0, theta);
                const double e = -std::norm(y - pts[i] - interf) * inv2s;
                m = logsumexp2(m, e);
            }
        metrics[i] = m;
    }
    const double l1 = logsumexp2(metrics[0], metrics[1]) -
                      logsumexp2(metrics[2], metrics[3]);
    const double l2 = logsumexp2(metrics[0], metrics[3]) -
                      logsumexp2(metrics[1], metrics[2]);
    return {l1, l2};
}

} // namespace

std::pair<double, double> llr_single_interferer_random_phase(cplx y,
                                                             double sigma_n2) {
    if (!(sigma_n2 > 0.0))
        throw std::invalid_argument("llr: sigma_n2 must be positive");
    auto prev = random_phase_quadrature(y, sigma_n2, 256);
    for (std::size_t n = 512; n <= 4096; n *= 2) {
        const auto cur = random_phase_quadrature(y, sigma_n2, n);
        const double e1 =
            std::abs(cur.first - prev.first) / std::max(1.0, std::abs(cur.first));
        const double e2 = std::abs(cur.second - prev.second) /
                          std::max(1.0, std::abs(cur.second));
        if (e1 <= 1e-6 && e2 <= 1e-6) return cur;
        prev = cur;
    }
    throw std::runtime_error(
        "llr_single_interferer_random_phase: phase quadrature did not reach "
        "1e-6 after refining to 4096 nodes (y = " +
        std::to_string(y.real()) + "+" + std::to_string(y.imag()) +
        "j, sigma_n2 = " + std::to_string(sigma_n2) + ")");
}

double log_bessel_i0(double x) {
    x = std::abs(x);
    if (x < 30.0) {
        // power series sum_k (x^2/4)^k / (k!)^2
        const double q = 0.25 * x * x;
        double term = 1.0, sum = 1.0;
        for (int k = 1; k < 200; ++k) {
            term *= q / (static_cast<double>(k) * k);
            sum += term;
            if (term < 1e-18 * sum) break;
        }
        return std::log(sum);
    }
    // asymptotic: I0(x) ~ e^x / sqrt(2 pi x) * (1 + 1/8x + 9/128x^2 + ...)
    const double ix = 1.0 / x;
    const double corr = 1.0 + ix * (0.125 + ix * (0.0703125 +
                        ix * (0.0732421875 + ix * 0.112152099609375)));
    return x - 0.5 * std::log(2.0 * kPi * x) + std::log(corr);
}

std::pair<double, double>
llr_single_interferer_random_phase_bessel(cplx y, double sigma_n2) {
    if (!(sigma_n2 > 0.0))
        throw std::invalid_argument("llr: sigma_n2 must be positive");
    // integral over theta of exp(-|c - e^{j theta}|^2 / 2s) equals
    // 2 pi exp(-(|c|^2 + 1) / 2s) I0(|c| / s); the interferer symbol index
    // only rotates the phase and drops out of the full-period integral
    const auto& pts = QpskConstellation::points();
    const double inv2s = 1.0 / (2.0 * sigma_n2);
    double metrics[4];
    for (int i = 0; i < 4; ++i) {
        const cplx c = y - pts[i];
        const double a = std::abs(c);
        metrics[i] = -(std::norm(c) + 1.0) * inv2s + log_bessel_i0(a / sigma_n2);
    }
    const double l1 = logsumexp2(metrics[0], metrics[1]) -
                      logsumexp2(metrics[2], metrics[3]);
    const double l2 = logsumexp2(metrics[0], metrics[3]) -
                      logsumexp2(metrics[1], metrics[2]);
    return {l1, l2};
}

} // namespace asyncra::channel
