#pragma once

#include "asyncra/rng.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace asyncra::channel {

using cplx = std::complex<double>;

// Unit-energy Gray-labelled QPSK. Point order S1..S4 carries labels
// {00, 01, 11, 10}; bit level 1 selects the imaginary half-plane, bit level
// 2 the real one. Adjacent points differ in a single bit.
struct QpskConstellation {
    static constexpr double kAmp = 0.70710678118654752440; // 1/sqrt(2)

    static const std::array<cplx, 4>& points();
    // label of point i as (bit1, bit2)
    static std::pair<int, int> label(std::size_t i);
    static cplx map(int bit1, int bit2);
};

// even number of bits -> n_s = bits/2 unit-energy symbols
std::vector<cplx> qpsk_modulate(std::span<const std::uint8_t> bits);

struct ReplicaSignal {
    std::vector<cplx> symbols;
    std::size_t start = 0; // offset in symbols from the window origin
    double phase = 0.0;
};

// Received window at symbol rate: superposed replicas plus complex Gaussian
// noise CN(0, 2 sigma_n^2), with per-symbol interferer counts.
struct SymbolTimeline {
    std::vector<cplx> samples;
    std::vector<std::uint32_t> count;       // replicas covering each symbol
    double sigma_n2 = 0.0;

    // aggregate interference power seen by a replica covering this symbol
    // (equal unit power per replica): Z_i = (count_i - 1) * P
    double interference_power(std::size_t i) const {
        return count[i] > 0 ? static_cast<double>(count[i] - 1) : 0.0;
    }
};

SymbolTimeline superpose(std::span<const ReplicaSignal> replicas,
                         std::size_t window_len, double sigma_n2, Rng& rng);

// Gaussian-interference demapper: y phase-compensated, sigma2 the total
// per-dimension noise-plus-interference variance. Positive LLR favors bit 0.
std::pair<double, double> llr_gaussian(cplx y, double sigma2);

// Exact LLR against one equal-power QPSK interferer with known phase offset
// dphi and fractional symbol offset deps in [0,1); marginalizes the 16
// interferer symbol pairs.
std::pair<double, double> llr_single_interferer(cplx y, double dphi,
                                                double deps, double sigma_n2);

// Same interferer, symbol-synchronous with unknown uniform phase; the phase
// is integrated numerically (periodic trapezoid, refined until the doubling
// check passes 1e-6 relative).
std::pair<double, double> llr_single_interferer_random_phase(cplx y,
                                                             double sigma_n2);

// Closed form of the random-phase marginalization via log I0; algebraically
// identical to the quadrature and used as its cross-check and in the
// density-evolution hot path.
std::pair<double, double> llr_single_interferer_random_phase_bessel(
    cplx y, double sigma_n2);

// log of the modified Bessel function I0
double log_bessel_i0(double x);

} // namespace asyncra::channel
