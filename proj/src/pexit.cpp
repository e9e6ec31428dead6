#include "asyncra/pexit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace asyncra::pexit {

namespace {

// fit boundaries and coefficients (least squares against 120-node
// Gauss-Hermite quadrature of the exact MI; see j_function docs)
constexpr double kS0 = 1.6363;
constexpr double kS1 = 10.0;
constexpr double kA[4] = {
    // sigma^2 .. sigma^5
    0.18063277530407831,
    -0.00045640587879363509,
    -0.024379675703060908,
    0.004952701522276423,
};
constexpr double kP0 = -0.45407188840686136;
constexpr double kQ[6] = {
    // (sigma - s0)^1 .. ^6 inside the exponential
    -0.53053466726454912,
    -0.14137603265243615,
    0.0069852459153003409,
    -0.0014647873645533059,
    0.00018126622950127497,
    -9.8535903276258398e-06,
};

double j_derivative(double s) {
    if (s <= 0.0) return 0.0;
    if (s <= kS0) {
        double d = 0.0, p = s;
        for (int i = 0; i < 4; ++i) {
            d += (i + 2) * kA[i] * p;
            p *= s;
        }
        return d;
    }
    if (s >= kS1) return 0.0;
    const double u = s - kS0;
    double e = kP0, de = 0.0, p = 1.0;
    for (int i = 0; i < 6; ++i) {
        de += (i + 1) * kQ[i] * p;
        p *= u;
        e += kQ[i] * p;
    }
    return -std::exp(e) * de;
}

} // namespace

double j_function(double sigma) {
    if (sigma <= 0.0) return 0.0;
    if (sigma >= kS1) return 1.0;
    if (sigma <= kS0) {
        const double s2 = sigma * sigma;
        return s2 * (kA[0] + sigma * (kA[1] + sigma * (kA[2] + sigma * kA[3])));
    }
    const double u = sigma - kS0;
    const double e =
        kP0 + u * (kQ[0] + u * (kQ[1] + u * (kQ[2] +
                   u * (kQ[3] + u * (kQ[4] + u * kQ[5])))));
    return 1.0 - std::exp(e);
}

double j_inverse(double mi) {
    if (mi <= 0.0) return 0.0;
    if (mi >= j_function(kS1 - 1e-9)) return kS1;
    // initial guess from the leading quadratic / leading exponential term
    double s;
    const double j_s0 = j_function(kS0);
    if (mi < j_s0)
        s = std::sqrt(mi / kA[0]);
    else
        s = kS0 + (std::log1p(-mi) - kP0) / kQ[0];
    s = std::clamp(s, 1e-9, kS1 - 1e-9);
    // safeguarded Newton
    double lo = 0.0, hi = kS1;
    for (int it = 0; it < 60; ++it) {
        const double f = j_function(s) - mi;
        if (f > 0.0)
            hi = s;
        else
            lo = s;
        const double d = j_derivative(s);
        double next = d > 0.0 ? s - f / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - s) < 1e-13 * (1.0 + s)) return next;
        s = next;
    }
    return s;
}

namespace {

struct Edge {
    std::size_t cn, vn;
    int mult;
};

std::vector<Edge> nonzero_cells(const proto::BaseMatrix& b) {
    std::vector<Edge> cells;
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j)
            if (b.at(i, j) > 0) cells.push_back({i, j, b.at(i, j)});
    return cells;
}

} // namespace

bool pexit_converges(const proto::BaseMatrix& b, const ProtoNoiseVector& pn,
                     const PexitOptions& opts) {
    if (pn.sigma2.size() != b.cols())
        throw std::invalid_argument("pexit: noise vector length != n_b");

    // channel LLR variance per type: QPSK Gray splits into two binary-input
    // AWGN subchannels with LLR variance 2/sigma2 (zero on punctured types)
    std::vector<double> ch_var(b.cols(), 0.0);
    for (std::size_t j = 0; j < b.cols(); ++j)
        if (!b.is_punctured(j)) {
            if (!(pn.sigma2[j] > 0.0))
                throw std::invalid_argument("pexit: non-positive variance");
            ch_var[j] = 2.0 / pn.sigma2[j];
        }

    const auto cells = nonzero_cells(b);
    const std::size_t nc = cells.size();
    std::vector<double> i_av(nc, 0.0), i_ev(nc, 0.0);
    std::vector<double> av_var(nc, 0.0), ev_dual(nc, 0.0);
    std::vector<double> vn_sum(b.cols()), cn_sum(b.rows());

    double best_min_app = 0.0;
    std::size_t stalled = 0;
    for (std::size_t it = 0; it < opts.max_iter; ++it) {
        // VN -> CN: per-edge output variance = channel + sum of incoming
        // minus own (parallel edges carry identical messages)
        for (std::size_t e = 0; e < nc; ++e) {
            const double s = j_inverse(i_av[e]);
            av_var[e] = s * s;
        }
        std::fill(vn_sum.begin(), vn_sum.end(), 0.0);
        for (std::size_t e = 0; e < nc; ++e)
            vn_sum[cells[e].vn] += cells[e].mult * av_var[e];
        for (std::size_t e = 0; e < nc; ++e) {
            const double var =
                ch_var[cells[e].vn] + vn_sum[cells[e].vn] - av_var[e];
            i_ev[e] = j_function(std::sqrt(std::max(var, 0.0)));
        }

        // CN -> VN in the dual domain
        for (std::size_t e = 0; e < nc; ++e) {
            const double s = j_inverse(1.0 - i_ev[e]);
            ev_dual[e] = s * s;
        }
        std::fill(cn_sum.begin(), cn_sum.end(), 0.0);
        for (std::size_t e = 0; e < nc; ++e)
            cn_sum[cells[e].cn] += cells[e].mult * ev_dual[e];
        for (std::size_t e = 0; e < nc; ++e) {
            const double var = cn_sum[cells[e].cn] - ev_dual[e];
            i_av[e] = 1.0 - j_function(std::sqrt(std::max(var, 0.0)));
        }

        // APP MI per VN type
        double min_app = 1.0;
        for (std::size_t e = 0; e < nc; ++e) {
            const double s = j_inverse(i_av[e]);
            av_var[e] = s * s;
        }
        std::fill(vn_sum.begin(), vn_sum.end(), 0.0);
        for (std::size_t e = 0; e < nc; ++e)
            vn_sum[cells[e].vn] += cells[e].mult * av_var[e];
        for (std::size_t j = 0; j < b.cols(); ++j)
            min_app = std::min(
                min_app, j_function(std::sqrt(ch_var[j] + vn_sum[j])));

        if (min_app >= 1.0 - opts.mi_target) return true;
        // punctured types need a few iterations before their MI lifts off,
        // so the stall rule carries a short patience window
        if (min_app > best_min_app + opts.stall) {
            best_min_app = min_app;
            stalled = 0;
        } else if (++stalled >= 25) {
            return false;
        }
    }
    return false;
}

namespace {

ThresholdResult bisect_interference(const proto::BaseMatrix& b, double alpha,
                                    Side side, double sigma_n2,
                                    const PexitOptions& opts) {
    const auto conv = [&](double sigma_i2) {
        auto [pn, eff] = analysis::make_noise_vector(b, alpha, side, sigma_n2,
                                                     sigma_i2);
        return pexit_converges(b, pn, opts);
    };
    ThresholdResult res;
    res.side = side;
    res.alpha_effective =
        analysis::make_noise_vector(b, alpha, side, sigma_n2, 0.0).second;

    if (!conv(0.0)) {
        // no margin at all
        res.value = 0.0;
        res.converged = false;
        return res;
    }
    double lo = 0.0, hi = 0.125;
    while (conv(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > opts.sigma_i2_cap) {
            res.value = std::numeric_limits<double>::infinity();
            res.converged = false;
            return res;
        }
    }
    std::size_t iters = 0;
    while ((hi - lo) > opts.bisect_rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        (conv(mid) ? lo : hi) = mid;
        ++iters;
    }
    res.value = 0.5 * (lo + hi);
    res.converged = true;
    res.iterations = iters;
    return res;
}

} // namespace

ThresholdResult pexit_interference_threshold(const proto::BaseMatrix& b,
                                             double alpha, Side side,
                                             double sigma_n2,
                                             const PexitOptions& opts) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("threshold: alpha must be in (0,1]");
    return bisect_interference(b, alpha, side, sigma_n2, opts);
}

ThresholdResult pexit_noise_threshold(const proto::BaseMatrix& b, double alpha,
                                      Side side, const PexitOptions& opts) {
    const auto conv = [&](double sigma_n2) {
        auto [pn, eff] =
            analysis::make_noise_vector(b, alpha, side, sigma_n2, 0.5);
        return pexit_converges(b, pn, opts);
    };
    ThresholdResult res;
    res.side = side;
    res.alpha_effective =
        analysis::make_noise_vector(b, alpha, side, 0.1, 0.0).second;

    double lo = 0.05, hi = 2.0;
    while (!conv(lo)) {
        lo *= 0.5;
        if (lo < 1e-6) {
            res.value = 0.0;
            res.converged = false;
            return res;
        }
    }
    while (conv(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e3) {
            res.value = std::numeric_limits<double>::infinity();
            res.converged = false;
            return res;
        }
    }
    std::size_t iters = 0;
    while ((hi - lo) > opts.bisect_rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        (conv(mid) ? lo : hi) = mid;
        ++iters;
    }
    res.value = 0.5 * (lo + hi);
    res.converged = true;
    res.iterations = iters;
    return res;
}

double gain(const proto::BaseMatrix& b, std::span<const double> alphas,
            double sigma_n2, const PexitOptions& opts) {
    if (alphas.empty())
        throw std::invalid_argument("gain: need at least one alpha");
    const double rate = proto::design_rate(b).value() * 2.0; // bits per symbol
    const bool symmetric = proto::is_edge_symmetric(b);
    double g = 1.0;
    for (double a : alphas) {
        const double limit = analysis::shannon_interference_limit(
            a, sigma_n2, rate);
        const auto beg =
            pexit_interference_threshold(b, a, Side::Begin, sigma_n2, opts);
        const auto end =
            symmetric ? beg
                      : pexit_interference_threshold(b, a, Side::End, sigma_n2,
                                                     opts);
        if (!std::isfinite(limit))
            throw std::invalid_argument(
                "gain: Shannon limit infinite at alpha, pick larger alphas");
        g *= (beg.value / limit) * (end.value / limit);
    }
    return g;
}

bool region_ldpc(const proto::BaseMatrix& b, const ProtoNoiseVector& pn,
                 const PexitOptions& opts) {
    return pexit_converges(b, pn, opts);
}

} // namespace asyncra::pexit
