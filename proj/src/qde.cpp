#include "asyncra/qde.hpp"

#include "asyncra/channel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>

namespace asyncra::qde {

namespace {
constexpr double kPi = 3.14159265358979323846;

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// FFTW planning is not thread-safe; plans are cached per transform size and
// executed via the new-array interface on per-workspace buffers.
struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

std::mutex g_plan_mutex;
std::map<std::size_t, PlanPair>& plan_cache() {
    static std::map<std::size_t, PlanPair> cache;
    return cache;
}

PlanPair get_plans(std::size_t n) {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto& cache = plan_cache();
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    PlanPair p;
    p.fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    p.bwd = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    cache[n] = p;
    return p;
}

} // namespace

InterfererModel model_from_name(const std::string& name) {
    if (name == "gaussian") return InterfererModel::Gaussian;
    if (name == "qpsk_phase0") return InterfererModel::QpskPhaseAligned;
    if (name == "qpsk_randphase") return InterfererModel::QpskRandomPhase;
    throw std::invalid_argument("unknown interferer model: " + name);
}

const char* model_name(InterfererModel m) {
    switch (m) {
    case InterfererModel::Gaussian: return "gaussian";
    case InterfererModel::QpskPhaseAligned: return "qpsk_phase0";
    case InterfererModel::QpskRandomPhase: return "qpsk_randphase";
    }
    throw std::logic_error("bad model enum");
}

class Workspace {
public:
    Workspace(std::size_t grid_half, double l_max, std::size_t n_g)
        : K(grid_half), Lmax(l_max), NB(2 * grid_half + 1),
          delta(l_max / static_cast<double>(grid_half)), Ng(n_g) {
        // dual domain g = -ln tanh(|L|/2); uniform bins on (0, g(delta)]
        g_max = -std::log(std::tanh(0.5 * delta));
        dg = g_max / static_cast<double>(Ng);

        // magnitude bin m (center (m+1)*delta) -> linear split in g
        fwd_i0.resize(K);
        fwd_w0.resize(K);
        for (std::size_t m = 0; m < K; ++m) {
            const double g =
                -std::log(std::tanh(0.5 * static_cast<double>(m + 1) * delta));
            double t = g / dg - 0.5;
            if (t < 0.0) t = 0.0;
            std::size_t i0 = std::min(static_cast<std::size_t>(t), Ng - 1);
            fwd_i0[m] = i0;
            fwd_w0[m] = 1.0 - std::min(t - std::floor(t), 1.0);
            if (i0 == Ng - 1) fwd_w0[m] = 1.0;
        }
        // g bin q (center (q+0.5)*dg) -> linear split over magnitude bins;
        // index -1 denotes the zero-LLR bin
        bwd_j0.resize(Ng);
        bwd_w0.resize(Ng);
        for (std::size_t q = 0; q < Ng; ++q) {
            const double g = (static_cast<double>(q) + 0.5) * dg;
            const double L = 2.0 * std::atanh(std::exp(-g));
            const double t = L / delta - 1.0;
            const double fl = std::floor(t);
            long j0 = static_cast<long>(fl);
            double w0 = 1.0 - (t - fl);
            if (j0 >= static_cast<long>(K) - 1) {
                j0 = static_cast<long>(K) - 1;
                w0 = 1.0;
            }
            bwd_j0[q] = j0; // may be -1 (zero bin)
            bwd_w0[q] = w0;
        }

        // The uniform g grid cannot resolve magnitudes above the back-map of
        // its first bin, so check-node updates treat that band separately:
        // "weak" magnitudes (representable in g) convolve via FFT, "strong"
        // ones go through coarse min-plus-correction tables.
        strong_lo = 2.0 * std::atanh(std::exp(-0.5 * dg));
        m_weak = std::min(K, static_cast<std::size_t>(strong_lo / delta));
        strong_w = (Lmax - strong_lo) / static_cast<double>(kStrongBins);
        const auto r = [](double u) { return std::log1p(std::exp(-u)); };
        ws_idx.resize(kStrongBins * m_weak);
        ws_w0.resize(kStrongBins * m_weak);
        for (std::size_t j = 0; j < kStrongBins; ++j) {
            const double s = strong_lo + (static_cast<double>(j) + 0.5) * strong_w;
            for (std::size_t m = 0; m < m_weak; ++m) {
                const double w = static_cast<double>(m + 1) * delta;
                const double out = w + r(w + s) - r(s - w);
                const double t = out / delta - 1.0;
                const double fl = std::floor(t);
                long j0 = static_cast<long>(fl);
                double w0 = 1.0 - (t - fl);
                if (j0 >= static_cast<long>(K) - 1) {
                    j0 = static_cast<long>(K) - 1;
                    w0 = 1.0;
                }
                ws_idx[j * m_weak + m] = j0; // may be -1 (zero bin)
                ws_w0[j * m_weak + m] = w0;
            }
        }

        fft_llr = next_pow2(2 * NB - 1);
        fft_g = next_pow2(2 * Ng - 1);
        plans_llr = get_plans(fft_llr);
        plans_g = get_plans(fft_g);

        const std::size_t nbuf = std::max(fft_llr, fft_g);
        buf_a = fftw_alloc_real(nbuf);
        buf_b = fftw_alloc_real(nbuf);
        spec_a = fftw_alloc_complex(nbuf / 2 + 1);
        spec_b = fftw_alloc_complex(nbuf / 2 + 1);
        spec_c = fftw_alloc_complex(nbuf / 2 + 1);
    }

    ~Workspace() {
        fftw_free(buf_a);
        fftw_free(buf_b);
        fftw_free(spec_a);
        fftw_free(spec_b);
        fftw_free(spec_c);
    }

    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    // real linear convolution of a (len na) and b (len nb) into out
    // (len na + nb - 1), via the cached r2c/c2r plans of size n
    void convolve(const double* a, std::size_t na, const double* b,
                  std::size_t nb, std::vector<double>& out, std::size_t n,
                  const PlanPair& plans) {
        std::memcpy(buf_a, a, na * sizeof(double));
        std::memset(buf_a + na, 0, (n - na) * sizeof(double));
        fftw_execute_dft_r2c(plans.fwd, buf_a, spec_a);
        std::memcpy(buf_b, b, nb * sizeof(double));
        std::memset(buf_b + nb, 0, (n - nb) * sizeof(double));
        fftw_execute_dft_r2c(plans.fwd, buf_b, spec_b);
        const double scale = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n / 2 + 1; ++i) {
            const double re = spec_a[i][0] * spec_b[i][0] -
                              spec_a[i][1] * spec_b[i][1];
            const double im = spec_a[i][0] * spec_b[i][1] +
                              spec_a[i][1] * spec_b[i][0];
            spec_c[i][0] = re * scale;
            spec_c[i][1] = im * scale;
        }
        fftw_execute_dft_c2r(plans.bwd, spec_c, buf_a);
        out.assign(buf_a, buf_a + (na + nb - 1));
    }

    std::size_t K;
    double Lmax;
    std::size_t NB;
    double delta;
    std::size_t Ng;
    double g_max, dg;
    std::vector<std::size_t> fwd_i0;
    std::vector<double> fwd_w0;
    std::vector<long> bwd_j0;
    std::vector<double> bwd_w0;

    static constexpr std::size_t kStrongBins = 256;
    double strong_lo = 0.0; // weak/strong magnitude boundary
    double strong_w = 0.0;  // coarse strong bin width
    std::size_t m_weak = 0; // magnitude bins below the boundary
    std::vector<long> ws_idx;  // weak x strong output mapping
    std::vector<double> ws_w0;

    std::size_t fft_llr, fft_g;
    PlanPair plans_llr, plans_g;
    double *buf_a, *buf_b;
    fftw_complex *spec_a, *spec_b, *spec_c;
};

std::shared_ptr<Workspace> make_workspace(std::size_t grid_half, double l_max,
                                          std::size_t n_g) {
    return std::make_shared<Workspace>(grid_half, l_max, n_g);
}

namespace {

double density_total(const Density& d) {
    double s = d.sure_pos + d.sure_neg;
    for (double m : d.mass) s += m;
    return s;
}

void normalize(Density& d) {
    if (d.sure_pos < 0.0) d.sure_pos = 0.0;
    if (d.sure_neg < 0.0) d.sure_neg = 0.0;
    for (double& m : d.mass)
        if (m < 0.0) m = 0.0;
    const double tot = density_total(d);
    if (tot <= 0.0) throw std::logic_error("qde: empty density");
    const double inv = 1.0 / tot;
    d.sure_pos *= inv;
    d.sure_neg *= inv;
    for (double& m : d.mass) m *= inv;
}

// deposit mass at LLR value x with a linear two-bin split
void deposit(const Workspace& ws, Density& d, double x, double w) {
    const double t = x / ws.delta + static_cast<double>(ws.K);
    if (t <= 0.0) {
        d.sure_neg += w;
        return;
    }
    if (t >= static_cast<double>(ws.NB - 1)) {
        d.sure_pos += w;
        return;
    }
    const double fl = std::floor(t);
    const auto k = static_cast<std::size_t>(fl);
    const double frac = t - fl;
    d.mass[k] += w * (1.0 - frac);
    d.mass[k + 1] += w * frac;
}

} // namespace

Density point_mass_zero(const Workspace& ws) {
    Density d;
    d.mass.assign(ws.NB, 0.0);
    d.mass[ws.K] = 1.0;
    return d;
}

Density point_mass(const Workspace& ws, double llr) {
    Density d;
    d.mass.assign(ws.NB, 0.0);
    deposit(ws, d, llr, 1.0);
    return d;
}

Density gaussian_density(const Workspace& ws, double mean, double var) {
    Density d;
    d.mass.assign(ws.NB, 0.0);
    const double inv = 1.0 / std::sqrt(2.0 * var);
    // integrate the normal density over each bin via erf differences
    double prev_cdf =
        0.5 * (1.0 + std::erf((-ws.Lmax - 0.5 * ws.delta - mean) * inv));
    d.sure_neg = prev_cdf;
    for (std::size_t k = 0; k < ws.NB; ++k) {
        const double edge =
            -ws.Lmax + (static_cast<double>(k) + 0.5) * ws.delta;
        const double cdf = 0.5 * (1.0 + std::erf((edge - mean) * inv));
        d.mass[k] = cdf - prev_cdf;
        prev_cdf = cdf;
    }
    d.sure_pos = 1.0 - prev_cdf;
    normalize(d);
    return d;
}

double error_prob(const Density& d) {
    const std::size_t K = (d.mass.size() - 1) / 2;
    double p = d.sure_neg;
    for (std::size_t k = 0; k < K; ++k) p += d.mass[k];
    p += 0.5 * d.mass[K];
    return p;
}

double mean_llr(const Workspace& ws, const Density& d) {
    double m = ws.Lmax * (d.sure_pos - d.sure_neg);
    for (std::size_t k = 0; k < ws.NB; ++k)
        m += d.mass[k] *
             (static_cast<double>(k) - static_cast<double>(ws.K)) * ws.delta;
    return m;
}

double clipped_fraction(const Density& d) { return d.sure_pos + d.sure_neg; }

Density vn_conv(Workspace& ws, const Density& a, const Density& b) {
    const std::size_t K = ws.K, NB = ws.NB;
    double ta = 0.0, tb = 0.0;
    for (double m : a.mass) ta += m;
    for (double m : b.mass) tb += m;

    Density out;
    out.mass.assign(NB, 0.0);
    out.sure_pos = a.sure_pos * (b.sure_pos + tb) + b.sure_pos * ta;
    out.sure_neg = a.sure_neg * (b.sure_neg + tb) + b.sure_neg * ta;
    // +inf and -inf cancel to an uninformative message
    out.mass[K] += a.sure_pos * b.sure_neg + a.sure_neg * b.sure_pos;

    std::vector<double> conv;
    ws.convolve(a.mass.data(), NB, b.mass.data(), NB, conv, ws.fft_llr,
                ws.plans_llr);
    // index r corresponds to bin r - K; outside the grid saturates
    for (std::size_t r = 0; r < conv.size(); ++r) {
        const double v = conv[r];
        if (v <= 0.0) continue;
        const long bin = static_cast<long>(r) - static_cast<long>(K);
        if (bin < 0)
            out.sure_neg += v;
        else if (bin >= static_cast<long>(NB))
            out.sure_pos += v;
        else
            out.mass[static_cast<std::size_t>(bin)] += v;
    }
    normalize(out);
    return out;
}

Density cn_boxplus(Workspace& ws, const Density& a, const Density& b) {
    const std::size_t K = ws.K, NB = ws.NB, Ng = ws.Ng;
    const std::size_t NS = Workspace::kStrongBins;
    const double za = a.mass[K], zb = b.mass[K];
    double ta = -za, tb = -zb;
    for (double m : a.mass) ta += m;
    for (double m : b.mass) tb += m;

    Density out;
    out.mass.assign(NB, 0.0);
    out.sure_pos = a.sure_pos * b.sure_pos + a.sure_neg * b.sure_neg;
    out.sure_neg = a.sure_pos * b.sure_neg + a.sure_neg * b.sure_pos;
    // a zero-LLR input forces a zero output
    double zero = za * (zb + tb + b.sure_pos + b.sure_neg) +
                  zb * (ta + a.sure_pos + a.sure_neg);

    // certainty x bulk passes the bulk through (sign-flipped under -inf)
    for (std::size_t k = 0; k < NB; ++k) {
        if (k == K) continue;
        out.mass[k] += a.sure_pos * b.mass[k] + a.sure_neg * b.mass[NB - 1 - k];
        out.mass[k] += b.sure_pos * a.mass[k] + b.sure_neg * a.mass[NB - 1 - k];
    }

    // signed-magnitude deposit with zero-bin spill, mapping given as
    // (first bin, weight) like the precomputed tables
    const auto deposit_mag = [&](long j0, double w0, double pos, double neg) {
        if (j0 < 0) {
            zero += (pos + neg) * w0;
            out.mass[K + 1] += pos * (1.0 - w0);
            out.mass[K - 1] += neg * (1.0 - w0);
            return;
        }
        const auto j = static_cast<std::size_t>(j0);
        out.mass[K + 1 + j] += pos * w0;
        out.mass[K - 1 - j] += neg * w0;
        if (j + 1 < K) {
            out.mass[K + 2 + j] += pos * (1.0 - w0);
            out.mass[K - 2 - j] += neg * (1.0 - w0);
        }
    };

    // coarse strong-band histogram of a bulk side
    const auto strong_hist = [&](const Density& d, std::vector<double>& pos,
                                 std::vector<double>& neg) {
        pos.assign(NS, 0.0);
        neg.assign(NS, 0.0);
        double total = 0.0;
        for (std::size_t m = ws.m_weak; m < K; ++m) {
            const double p = d.mass[K + 1 + m], n = d.mass[K - 1 - m];
            if (p == 0.0 && n == 0.0) continue;
            const double mu = static_cast<double>(m + 1) * ws.delta;
            auto j = static_cast<std::size_t>((mu - ws.strong_lo) / ws.strong_w);
            if (j >= NS) j = NS - 1;
            pos[j] += p;
            neg[j] += n;
            total += p + n;
        }
        return total;
    };

    std::vector<double> spa, sna, spb, snb;
    const double strong_a = strong_hist(a, spa, sna);
    const double strong_b = strong_hist(b, spb, snb);

    // weak x weak in the dual domain: u/v transform diagonalizes the sign
    auto to_g = [&](const Density& d, std::vector<double>& u,
                    std::vector<double>& v) {
        u.assign(Ng, 0.0);
        v.assign(Ng, 0.0);
        for (std::size_t m = 0; m < ws.m_weak; ++m) {
            const double pos = d.mass[K + 1 + m];
            const double neg = d.mass[K - 1 - m];
            if (pos == 0.0 && neg == 0.0) continue;
            const std::size_t i0 = ws.fwd_i0[m];
            const double w0 = ws.fwd_w0[m];
            const double su = pos + neg, sv = pos - neg;
            u[i0] += su * w0;
            v[i0] += sv * w0;
            if (i0 + 1 < Ng) {
                u[i0 + 1] += su * (1.0 - w0);
                v[i0 + 1] += sv * (1.0 - w0);
            }
        }
    };
    std::vector<double> ua, va, ub, vb, cu, cv;
    to_g(a, ua, va);
    to_g(b, ub, vb);
    ws.convolve(ua.data(), Ng, ub.data(), Ng, cu, ws.fft_g, ws.plans_g);
    ws.convolve(va.data(), Ng, vb.data(), Ng, cv, ws.fft_g, ws.plans_g);
    // fold the tail beyond g_max into the weakest-magnitude bin
    for (std::size_t r = Ng; r < cu.size(); ++r) {
        cu[Ng - 1] += cu[r];
        cv[Ng - 1] += cv[r];
    }
    for (std::size_t q = 0; q < Ng; ++q) {
        double gp = 0.5 * (cu[q] + cv[q]);
        double gn = 0.5 * (cu[q] - cv[q]);
        if (gp < 0.0) gp = 0.0;
        if (gn < 0.0) gn = 0.0;
        if (gp == 0.0 && gn == 0.0) continue;
        deposit_mag(ws.bwd_j0[q], ws.bwd_w0[q], gp, gn);
    }

    // weak x strong through the precomputed min-plus-correction tables
    const auto weak_strong = [&](const Density& weak,
                                 const std::vector<double>& sp,
                                 const std::vector<double>& sn) {
        for (std::size_t j = 0; j < NS; ++j) {
            const double wp = sp[j], wn = sn[j];
            if (wp + wn < 1e-16) continue;
            const long* idx = ws.ws_idx.data() + j * ws.m_weak;
            const double* w0s = ws.ws_w0.data() + j * ws.m_weak;
            for (std::size_t m = 0; m < ws.m_weak; ++m) {
                const double ap = weak.mass[K + 1 + m];
                const double an = weak.mass[K - 1 - m];
                if (ap == 0.0 && an == 0.0) continue;
                deposit_mag(idx[m], w0s[m], ap * wp + an * wn,
                            ap * wn + an * wp);
            }
        }
    };
    if (strong_b > 1e-16) weak_strong(a, spb, snb);
    if (strong_a > 1e-16) weak_strong(b, spa, sna);

    // strong x strong on the coarse grid, corrections evaluated directly
    if (strong_a > 1e-16 && strong_b > 1e-16) {
        const auto r_corr = [](double u) { return std::log1p(std::exp(-u)); };
        for (std::size_t i = 0; i < NS; ++i) {
            const double api = spa[i], ani = sna[i];
            if (api + ani < 1e-16) continue;
            const double si =
                ws.strong_lo + (static_cast<double>(i) + 0.5) * ws.strong_w;
            for (std::size_t j = 0; j < NS; ++j) {
                const double bpj = spb[j], bnj = snb[j];
                if (bpj + bnj < 1e-16) continue;
                const double sj = ws.strong_lo +
                                  (static_cast<double>(j) + 0.5) * ws.strong_w;
                const double val = std::min(si, sj) + r_corr(si + sj) -
                                   r_corr(std::abs(si - sj));
                const double t = val / ws.delta - 1.0;
                const double fl = std::floor(t);
                long j0 = static_cast<long>(fl);
                double w0 = 1.0 - (t - fl);
                if (j0 >= static_cast<long>(K) - 1) {
                    j0 = static_cast<long>(K) - 1;
                    w0 = 1.0;
                }
                deposit_mag(j0, w0, api * bpj + ani * bnj,
                            api * bnj + ani * bpj);
            }
        }
    }

    out.mass[K] += zero;
    normalize(out);
    return out;
}

Density interfered_density(Workspace& ws, InterfererModel model,
                           double sigma_n2) {
    if (!(sigma_n2 > 0.0))
        throw std::invalid_argument("qde: sigma_n2 must be positive");
    using channel::cplx;
    const auto& pts = channel::QpskConstellation::points();

    if (model == InterfererModel::Gaussian) {
        const double s2 = sigma_n2 + 0.5;
        return gaussian_density(ws, 1.0 / s2, 2.0 / s2);
    }

    Density d;
    d.mass.assign(ws.NB, 0.0);
    const cplx tx = pts[0]; // conditioning on S1; S2 gives the same law

    if (model == InterfererModel::QpskPhaseAligned) {
        // pushforward of S1 + S_k + noise through the exact demapper
        const double sigma = std::sqrt(sigma_n2);
        const std::size_t n = 257;
        const double h = 16.0 * sigma / static_cast<double>(n - 1);
        std::vector<double> pdf(n);
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = -8.0 * sigma + h * static_cast<double>(i);
            pdf[i] = std::exp(-0.5 * x * x / sigma_n2);
            norm += pdf[i];
        }
        for (auto& p : pdf) p /= norm;
        for (int k = 0; k < 4; ++k) {
            const cplx mean = tx + pts[k];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double w = 0.25 * pdf[i] * pdf[j];
                    if (w < 1e-300) continue;
                    const cplx y(mean.real() - 8.0 * sigma +
                                     h * static_cast<double>(i),
                                 mean.imag() - 8.0 * sigma +
                                     h * static_cast<double>(j));
                    const double l1 =
                        channel::llr_single_interferer(y, 0.0, 0.0, sigma_n2)
                            .first;
                    deposit(ws, d, l1, w);
                }
        }
    } else {
        // random phase: the interference-plus-noise term v = e^{j psi} + n is
        // circular with radial density ~ exp(-(r^2+1)/2s) I0(r/s); grid over
        // v and push through the closed-form demapper
        const double sigma = std::sqrt(sigma_n2);
        const double range = 1.0 + 8.0 * sigma;
        const std::size_t n =
            std::min<std::size_t>(769, std::max<std::size_t>(
                257, static_cast<std::size_t>(16.0 * range / sigma)));
        const double h = 2.0 * range / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double vr = -range + h * static_cast<double>(i);
                const double vi = -range + h * static_cast<double>(j);
                const double r2 = vr * vr + vi * vi;
                // radial law of ring-plus-noise; normalize() rescales later
                const double lw =
                    -(r2 + 1.0) / (2.0 * sigma_n2) +
                    channel::log_bessel_i0(std::sqrt(r2) / sigma_n2);
                const double w = std::exp(lw);
                if (w < 1e-280) continue;
                const cplx y(tx.real() + vr, tx.imag() + vi);
                const double l1 =
                    channel::llr_single_interferer_random_phase_bessel(
                        y, sigma_n2)
                        .first;
                deposit(ws, d, l1, w);
            }
    }
    normalize(d);
    return d;
}

namespace {

struct Cell {
    std::size_t cn, vn;
    int mult;
};

// forward-backward chain of pairwise ops with per-slot extrinsic outputs
template <typename Op>
void fb_extrinsic(const std::vector<const Density*>& in, Op&& op,
                  std::vector<Density>& out, Density* total) {
    const std::size_t d = in.size();
    out.resize(d);
    if (d == 1) {
        // no extrinsic input; leave out[0] as set by the caller
        if (total) *total = *in[0];
        return;
    }
    std::vector<Density> fwd(d), bwd(d);
    fwd[0] = *in[0];
    for (std::size_t i = 1; i < d; ++i) fwd[i] = op(fwd[i - 1], *in[i]);
    bwd[d - 1] = *in[d - 1];
    for (std::size_t i = d - 1; i-- > 0;) bwd[i] = op(*in[i], bwd[i + 1]);
    out[0] = bwd[1];
    out[d - 1] = fwd[d - 2];
    for (std::size_t i = 1; i + 1 < d; ++i) out[i] = op(fwd[i - 1], bwd[i + 1]);
    if (total) *total = fwd[d - 1];
}

} // namespace

bool qde_converges(Workspace& ws, const proto::BaseMatrix& b,
                   const std::vector<Density>& channel,
                   const QdeOptions& opts) {
    if (channel.size() != b.cols())
        throw std::invalid_argument("qde: one channel density per VN type");

    std::vector<Cell> cells;
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j)
            if (b.at(i, j) > 0) cells.push_back({i, j, b.at(i, j)});
    const std::size_t nc = cells.size();

    std::vector<std::vector<std::size_t>> vn_cells(b.cols()), cn_cells(b.rows());
    for (std::size_t e = 0; e < nc; ++e) {
        vn_cells[cells[e].vn].push_back(e);
        cn_cells[cells[e].cn].push_back(e);
    }

    const auto vn_op = [&](const Density& x, const Density& y) {
        return vn_conv(ws, x, y);
    };
    const auto cn_op = [&](const Density& x, const Density& y) {
        return cn_boxplus(ws, x, y);
    };

    std::vector<Density> c2v(nc, point_mass_zero(ws)), v2c(nc);
    std::vector<const Density*> in;
    std::vector<Density> ext;
    Density app;

    double best_pe = 1.0;
    std::size_t stalled = 0;
    for (std::size_t it = 0; it < opts.max_iter; ++it) {
        // VN pass (channel as the first slot), APP from the full product
        double pe_max = 0.0;
        for (std::size_t j = 0; j < b.cols(); ++j) {
            in.clear();
            in.push_back(&channel[j]);
            std::vector<std::size_t> slot_cell;
            for (std::size_t e : vn_cells[j])
                for (int t = 0; t < cells[e].mult; ++t) {
                    in.push_back(&c2v[e]);
                    slot_cell.push_back(e);
                }
            fb_extrinsic(in, vn_op, ext, &app);
            // slots of the same cell produce identical outputs
            for (std::size_t s = 0; s < slot_cell.size(); ++s)
                if (s == 0 || slot_cell[s] != slot_cell[s - 1])
                    v2c[slot_cell[s]] = std::move(ext[s + 1]);
            pe_max = std::max(pe_max, error_prob(app));
        }

        if (pe_max < opts.pe_target) return true;
        if (pe_max < best_pe * (1.0 - opts.stall_rel)) {
            best_pe = pe_max;
            stalled = 0;
        } else if (++stalled >= opts.stall_patience) {
            return false;
        }

        // CN pass
        for (std::size_t i = 0; i < b.rows(); ++i) {
            in.clear();
            std::vector<std::size_t> slot_cell;
            for (std::size_t e : cn_cells[i])
                for (int t = 0; t < cells[e].mult; ++t) {
                    in.push_back(&v2c[e]);
                    slot_cell.push_back(e);
                }
            if (in.size() == 1) {
                // a weight-1 row pins its variable to zero
                Density sure;
                sure.mass.assign(ws.NB, 0.0);
                sure.sure_pos = 1.0;
                c2v[slot_cell[0]] = std::move(sure);
                continue;
            }
            fb_extrinsic(in, cn_op, ext, nullptr);
            for (std::size_t s = 0; s < slot_cell.size(); ++s)
                if (s == 0 || slot_cell[s] != slot_cell[s - 1])
                    c2v[slot_cell[s]] = std::move(ext[s]);
        }
    }
    return false;
}

namespace {

// channel densities for all types; returns worst clipped fraction
double build_channel(Workspace& ws, const proto::BaseMatrix& b,
                     InterfererModel model, double alpha, double sigma_n2,
                     std::vector<Density>& out) {
    const auto unp = b.unpunctured_cols();
    auto n_int = static_cast<std::size_t>(
        std::llround(alpha * static_cast<double>(unp.size())));
    n_int = std::min(n_int, unp.size());

    out.assign(b.cols(), Density{});
    const Density clean =
        gaussian_density(ws, 1.0 / sigma_n2, 2.0 / sigma_n2);
    const Density zero = point_mass_zero(ws);
    Density hit;
    if (n_int > 0) hit = interfered_density(ws, model, sigma_n2);

    double worst_clip = clipped_fraction(clean);
    for (std::size_t j = 0; j < b.cols(); ++j) out[j] = zero;
    for (std::size_t t = 0; t < unp.size(); ++t)
        out[unp[t]] = (t < n_int) ? hit : clean;
    if (n_int > 0) worst_clip = std::max(worst_clip, clipped_fraction(hit));
    return worst_clip;
}

} // namespace

analysis::ThresholdResult qde_threshold(const proto::BaseMatrix& b,
                                        InterfererModel model, double alpha,
                                        const QdeOptions& opts) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("qde_threshold: alpha outside [0,1]");

    std::size_t grid_half = opts.grid_half;
    double l_max = opts.l_max;
    std::size_t n_g = opts.n_g;
    auto ws = make_workspace(grid_half, l_max, n_g);

    const auto converges = [&](double sigma_n2) {
        for (std::size_t attempt = 0;; ++attempt) {
            std::vector<Density> ch;
            const double clip = build_channel(*ws, b, model, alpha, sigma_n2, ch);
            if (clip <= opts.saturation_limit)
                return qde_converges(*ws, b, ch, opts);
            if (attempt >= opts.widen_retries)
                throw std::runtime_error(
                    "qde: LLR grid saturated even after widening; sigma_n2 = " +
                    std::to_string(sigma_n2));
            // keep the bin width, double the range
            grid_half *= 2;
            l_max *= 2.0;
            n_g *= 2;
            ws = make_workspace(grid_half, l_max, n_g);
        }
    };

    analysis::ThresholdResult res;
    res.side = analysis::Side::Begin;
    {
        const auto unp_n = b.unpunctured_cols().size();
        const auto n_int = std::min<std::size_t>(
            static_cast<std::size_t>(
                std::llround(alpha * static_cast<double>(unp_n))),
            unp_n);
        res.alpha_effective =
            static_cast<double>(n_int) / static_cast<double>(unp_n);
    }

    double lo = 0.1, hi = 1.0;
    while (!converges(lo)) {
        hi = lo;
        lo *= 0.5;
        if (lo < 1e-4) {
            res.value = 0.0;
            res.converged = false;
            return res;
        }
    }
    while (converges(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 16.0) {
            res.value = std::numeric_limits<double>::infinity();
            res.converged = false;
            return res;
        }
    }
    std::size_t iters = 0;
    while ((hi - lo) > opts.bisect_rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        (converges(mid) ? lo : hi) = mid;
        ++iters;
    }
    res.value = 0.5 * (lo + hi);
    res.converged = true;
    res.iterations = iters;
    return res;
}

} // namespace asyncra::qde
