#pragma once

#include "asyncra/analysis.hpp"
#include "asyncra/protograph.hpp"

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace asyncra::qde {

enum class InterfererModel { Gaussian, QpskPhaseAligned, QpskRandomPhase };

InterfererModel model_from_name(const std::string& name);
const char* model_name(InterfererModel m);

struct QdeOptions {
    // LLR grid: 2*grid_half+1 bins with centers k*delta on [-l_max, l_max]
    std::size_t grid_half = 4095;
    double l_max = 30.0;
    std::size_t n_g = 8192;        // dual (tanh) domain bins
    std::size_t max_iter = 2000;
    double pe_target = 1e-6;
    double stall_rel = 1e-5;       // relative Pe improvement considered progress
    std::size_t stall_patience = 25;
    double bisect_rel_tol = 1e-3;
    double saturation_limit = 1e-3; // channel mass allowed beyond +-l_max
    std::size_t widen_retries = 2;
};

// Quantized LLR density: probability mass on the odd symmetric grid plus
// certainty masses at +-infinity (the clip region beyond l_max).
struct Density {
    std::vector<double> mass;
    double sure_pos = 0.0;
    double sure_neg = 0.0;
};

class Workspace; // grid tables, FFT buffers and plans

std::shared_ptr<Workspace> make_workspace(std::size_t grid_half, double l_max,
                                          std::size_t n_g);

// density/grid primitives (exposed for the unit suite)
Density point_mass_zero(const Workspace& ws);
Density point_mass(const Workspace& ws, double llr);
Density gaussian_density(const Workspace& ws, double mean, double var);
Density vn_conv(Workspace& ws, const Density& a, const Density& b);
Density cn_boxplus(Workspace& ws, const Density& a, const Density& b);
double error_prob(const Density& d);
double mean_llr(const Workspace& ws, const Density& d);
double clipped_fraction(const Density& d);

// channel LLR density for one interfered VN type under the chosen model,
// single equal-power interferer (P = Z = 1), symbol-synchronous
Density interfered_density(Workspace& ws, InterfererModel model,
                           double sigma_n2);

// full message-passing density evolution of the protograph with per-type
// channel densities; true iff every type's APP error probability falls
// below pe_target
bool qde_converges(Workspace& ws, const proto::BaseMatrix& b,
                   const std::vector<Density>& channel, const QdeOptions& opts);

// Largest noise variance sigma_n2 at which the ensemble decodes with a
// single equal-power interferer over fraction alpha (interfered types taken
// from the begin side of the type grid; alpha = 0 gives the AWGN-only
// threshold). Bisection at bisect_rel_tol; grids widen automatically when
// channel densities clip more than saturation_limit.
analysis::ThresholdResult qde_threshold(const proto::BaseMatrix& b,
                                        InterfererModel model, double alpha,
                                        const QdeOptions& opts = {});

} // namespace asyncra::qde
