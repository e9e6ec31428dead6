#pragma once

#include "asyncra/analysis.hpp"
#include "asyncra/protograph.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace asyncra::pexit {

using analysis::ProtoNoiseVector;
using analysis::Side;
using analysis::ThresholdResult;

// MI of a consistent Gaussian LLR message N(sigma^2/2, sigma^2). Two-piece
// fit (quintic below 1.6363, 1 - exp(sextic) above), max absolute error
// 2.8e-5 against Gauss-Hermite quadrature; strictly increasing.
double j_function(double sigma);
double j_inverse(double mi);

struct PexitOptions {
    std::size_t max_iter = 2000;
    double mi_target = 1e-6;   // success: I_APP >= 1 - mi_target on all types
    double stall = 1e-9;       // failure: best-I_APP improvement below this
    double bisect_rel_tol = 1e-4;
    double sigma_i2_cap = 1e4; // declare +infinity above this interference
};

// Protograph EXIT recursion under the Gaussian-LLR channel model; true iff
// the APP mutual information of every VN type converges to 1.
bool pexit_converges(const proto::BaseMatrix& b, const ProtoNoiseVector& pn,
                     const PexitOptions& opts = {});

// Largest single-burst interference variance the ensemble tolerates at
// fraction alpha from the given side, fixed sigma_n2. Bisection to
// bisect_rel_tol; value +infinity (converged = false) when the ensemble
// decodes beyond sigma_i2_cap.
ThresholdResult pexit_interference_threshold(const proto::BaseMatrix& b,
                                             double alpha, Side side,
                                             double sigma_n2,
                                             const PexitOptions& opts = {});

// Largest sigma_n2 the ensemble tolerates with one equal-power Gaussian
// interferer (variance 1/2 per dimension) over fraction alpha; the axis
// density evolution bisects, for cross-method comparison.
ThresholdResult pexit_noise_threshold(const proto::BaseMatrix& b, double alpha,
                                      Side side,
                                      const PexitOptions& opts = {});

// Product over target fractions of begin- and end-side threshold-to-Shannon-
// limit ratios.
double gain(const proto::BaseMatrix& b, std::span<const double> alphas,
            double sigma_n2, const PexitOptions& opts = {});

// LDPC-ensemble decoding region: delegates to pexit_converges.
bool region_ldpc(const proto::BaseMatrix& b, const ProtoNoiseVector& pn,
                 const PexitOptions& opts = {});

} // namespace asyncra::pexit
