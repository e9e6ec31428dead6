#pragma once

#include "asyncra/protograph.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace asyncra::analysis {

inline double esn0_db_to_sigma_n2(double db) {
    // P = 1, Es/N0 = P / (2 sigma_n^2)
    return 0.5 / std::pow(10.0, db / 10.0);
}

inline double sigma_n2_to_esn0_db(double s2) {
    return 10.0 * std::log10(0.5 / s2);
}

// Symmetric mutual information of unit-energy Gray QPSK over CN(0, 2 sigma2)
// noise, in bits per symbol. Gauss-Hermite quadrature over the two binary
// subchannels; absolute error below 1e-4 over the whole range.
double qpsk_capacity(double sigma2);

// Ordered block-interference description of one replica: fraction alpha_j of
// the symbols sees noise-plus-interference variance sigma2_j per dimension.
struct InterferencePattern {
    struct Block {
        double alpha = 0.0;
        double sigma2 = 0.0;
    };
    std::vector<Block> blocks; // sigma2 strictly increasing
    double sigma_n2 = 0.0;

    InterferencePattern(std::vector<Block> blk, double noise_var);
    double alpha_total() const;

    // group per-symbol interferer counts into the ordered pattern
    // (sigma2_j = sigma_n2 + j/2 for j interferers, unit power)
    static InterferencePattern from_counts(std::span<const std::uint32_t> counts,
                                           double sigma_n2);
};

// Outage capacity of the block-interference surrogate channel.
double outage_capacity(const InterferencePattern& p);

// Largest interference variance (per dimension) at which a fraction-alpha
// single-block collision still supports rate R; +infinity when even
// unbounded interference leaves the outage capacity above R. Bisection with
// 1e-6 relative tolerance. Throws when R is infeasible at sigma_i2 = 0.
double shannon_interference_limit(double alpha, double sigma_n2, double rate);

// Decoding region of a (fraction-beta) capacity-achieving random ensemble.
bool region_random(const InterferencePattern& p, double rate, double beta);

// Per-VN-type noise-plus-interference variances; punctured types carry no
// channel observation and their entries are ignored.
struct ProtoNoiseVector {
    std::vector<double> sigma2;
};

enum class Side { Begin, End };

inline const char* side_name(Side s) {
    return s == Side::Begin ? "begin" : "end";
}

struct ThresholdResult {
    double value = 0.0;       // threshold variance (sigma_i,th^2 or sigma_n,th^2)
    Side side = Side::Begin;
    double alpha_effective = 0.0;
    bool converged = false;   // bisection bracketed a finite threshold
    std::size_t iterations = 0;

    bool is_infinite() const {
        return value == std::numeric_limits<double>::infinity();
    }
};

// Build the noise vector for a contiguous interference burst: interfered
// types = round(alpha * (n_b - p_b)) unpunctured types from the chosen side
// at sigma_n2 + sigma_i2, the rest at sigma_n2. Returns the effective alpha
// actually representable on the type grid.
std::pair<ProtoNoiseVector, double>
make_noise_vector(const proto::BaseMatrix& b, double alpha, Side side,
                  double sigma_n2, double sigma_i2);

} // namespace asyncra::analysis
