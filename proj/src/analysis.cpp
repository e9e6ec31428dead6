#include "asyncra/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asyncra::analysis {

namespace {

// 64-point probabilists' Gauss-Hermite rule, weights normalized so that
// E[f(T)] = sum w_i f(t_i) for T ~ N(0,1).
struct GhNode {
    double t, w;
};
constexpr GhNode kGh64[] = {
    {-14.886186143339453, 3.1231879651077347e-49}, {-13.99404990887647, 9.4769631900429567e-44},
    {-13.255649357397285, 1.9301704298297602e-39}, {-12.596752480605723, 8.7866356793103621e-36},
    {-11.989036605128154, 1.4384921208585856e-32}, {-11.417918056820673, 1.0883801541458555e-29},
    {-10.874651988398703, 4.4355444204708753e-27}, {-10.353475921269002, 1.0785651103547861e-24},
    {-9.8503384578821507, 1.6829001120429282e-22}, {-9.3622525462523072, 1.7784691911122751e-20},
    {-8.8869339058381804, 1.3269088554685194e-18}, {-8.4225840923285862, 7.2221535735245136e-17},
    {-7.9677529819412207, 2.944293146997723e-15}, {-7.5212476617873092, 9.1869287873296184e-14},
    {-7.0820698308048406, 2.2337268555257743e-12}, {-6.6493714563417203, 4.2964262489852712e-11},
    {-6.2224225326264548, 6.6214234109506991e-10}, {-5.8005871018292092, 8.2660844214793227e-09},
    {-5.3833050611646138, 8.4376410475410006e-08}, {-4.970078111602426, 7.099424621906659e-07},
    {-4.5604587281440505, 4.9583797210632245e-06}, {-4.1540413713409086, 2.8919958244145737e-05},
    {-3.7504553852256111, 0.00014160238834136032}, {-3.3493591797524944, 0.00058468608306960236},
    {-2.9504354015399628, 0.002043825838784884}, {-2.5533868709840828, 0.0060684460158915016},
    {-2.1579331167626106, 0.015347721995577652}, {-1.76380737694281, 0.033140485961928},
    {-1.3707539637008053, 0.061213638510676474}, {-0.97852590898502922, 0.096863363895975316},
    {-0.58688282330529251, 0.13145323131750089}, {-0.19558891056727551, 0.15310831636189684},
    {0.19558891056727551, 0.15310831636189684}, {0.58688282330529251, 0.13145323131750089},
    {0.97852590898502922, 0.096863363895975316}, {1.3707539637008053, 0.061213638510676474},
    {1.76380737694281, 0.033140485961928}, {2.1579331167626106, 0.015347721995577652},
    {2.5533868709840828, 0.0060684460158915016}, {2.9504354015399628, 0.002043825838784884},
    {3.3493591797524944, 0.00058468608306960236}, {3.7504553852256111, 0.00014160238834136032},
    {4.1540413713409086, 2.8919958244145737e-05}, {4.5604587281440505, 4.9583797210632245e-06},
    {4.970078111602426, 7.099424621906659e-07}, {5.3833050611646138, 8.4376410475410006e-08},
    {5.8005871018292092, 8.2660844214793227e-09}, {6.2224225326264548, 6.6214234109506991e-10},
    {6.6493714563417203, 4.2964262489852712e-11}, {7.0820698308048406, 2.2337268555257743e-12},
    {7.5212476617873092, 9.1869287873296184e-14}, {7.9677529819412207, 2.944293146997723e-15},
    {8.4225840923285862, 7.2221535735245136e-17}, {8.8869339058381804, 1.3269088554685194e-18},
    {9.3622525462523072, 1.7784691911122751e-20}, {9.8503384578821507, 1.6829001120429282e-22},
    {10.353475921269002, 1.0785651103547861e-24}, {10.874651988398703, 4.4355444204708753e-27},
    {11.417918056820673, 1.0883801541458555e-29}, {11.989036605128154, 1.4384921208585856e-32},
    {12.596752480605723, 8.7866356793103621e-36}, {13.255649357397285, 1.9301704298297602e-39},
    {13.99404990887647, 9.4769631900429567e-44}, {14.886186143339453, 3.1231879651077347e-49},
};

double log1pexp(double x) {
    if (x > 35.0) return x;
    if (x < -37.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

constexpr double kLn2 = 0.69314718055994530942;

} // namespace

double qpsk_capacity(double sigma2) {
    if (!(sigma2 > 0.0))
        throw std::invalid_argument("qpsk_capacity: sigma2 must be positive");
    // two parallel binary subchannels with amplitude 1/sqrt(2): the bit LLR
    // given bit 0 is (1 + sqrt(2) sigma t) / sigma2, t ~ N(0,1)
    const double sigma = std::sqrt(sigma2);
    double loss = 0.0;
    for (const auto& n : kGh64) {
        const double llr = (1.0 + std::sqrt(2.0) * sigma * n.t) / sigma2;
        loss += n.w * log1pexp(-llr);
    }
    return 2.0 * (1.0 - loss / kLn2);
}

InterferencePattern::InterferencePattern(std::vector<Block> blk,
                                         double noise_var)
    : blocks(std::move(blk)), sigma_n2(noise_var) {
    if (!(sigma_n2 > 0.0))
        throw std::invalid_argument("pattern: sigma_n2 must be positive");
    double sum = 0.0, prev = sigma_n2;
    for (const auto& b : blocks) {
        if (b.alpha < 0.0 || b.alpha > 1.0)
            throw std::invalid_argument("pattern: alpha outside [0,1]");
        if (b.sigma2 <= prev)
            throw std::invalid_argument(
                "pattern: sigma2 levels must be strictly increasing above "
                "sigma_n2");
        prev = b.sigma2;
        sum += b.alpha;
    }
    if (sum > 1.0 + 1e-12)
        throw std::invalid_argument("pattern: alpha fractions exceed 1");
}

double InterferencePattern::alpha_total() const {
    double sum = 0.0;
    for (const auto& b : blocks) sum += b.alpha;
    return sum;
}

InterferencePattern
InterferencePattern::from_counts(std::span<const std::uint32_t> counts,
                                 double sigma_n2) {
    std::uint32_t max_count = 0;
    for (auto c : counts) max_count = std::max(max_count, c);
    std::vector<std::size_t> hist(max_count + 1, 0);
    for (auto c : counts) ++hist[c];
    std::vector<Block> blocks;
    const double n = static_cast<double>(counts.size());
    for (std::uint32_t j = 1; j <= max_count; ++j)
        if (hist[j] > 0)
            blocks.push_back({static_cast<double>(hist[j]) / n,
                              sigma_n2 + 0.5 * static_cast<double>(j)});
    return InterferencePattern(std::move(blocks), sigma_n2);
}

double outage_capacity(const InterferencePattern& p) {
    double c = (1.0 - p.alpha_total()) * qpsk_capacity(p.sigma_n2);
    for (const auto& b : p.blocks)
        if (b.alpha > 0.0) c += b.alpha * qpsk_capacity(b.sigma2);
    return c;
}

double shannon_interference_limit(double alpha, double sigma_n2, double rate) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("shannon limit: alpha must be in (0,1]");
    const double clean = qpsk_capacity(sigma_n2);
    // rate == clean is the boundary case with zero interference margin
    if (rate > clean)
        throw std::invalid_argument(
            "shannon limit: rate infeasible even without interference");
    const auto co = [&](double sigma_i2) {
        return (1.0 - alpha) * clean + alpha * qpsk_capacity(sigma_n2 + sigma_i2);
    };
    // interference -> infinity leaves (1-alpha)*C(sigma_n2)
    if ((1.0 - alpha) * clean >= rate)
        return std::numeric_limits<double>::infinity();
    double lo = 0.0, hi = 1.0;
    while (co(hi) > rate) {
        hi *= 2.0;
        if (hi > 1e12)
            return std::numeric_limits<double>::infinity();
    }
    while ((hi - lo) > 1e-6 * hi) {
        const double mid = 0.5 * (lo + hi);
        (co(mid) > rate ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

bool region_random(const InterferencePattern& p, double rate, double beta) {
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("region: beta must be in (0,1]");
    if (p.alpha_total() > 1.0 + 1e-12) return false;
    return rate < beta * outage_capacity(p);
}

std::pair<ProtoNoiseVector, double>
make_noise_vector(const proto::BaseMatrix& b, double alpha, Side side,
                  double sigma_n2, double sigma_i2) {
    const auto unp = b.unpunctured_cols();
    const std::size_t n_types = unp.size();
    auto n_int = static_cast<std::size_t>(
        std::llround(alpha * static_cast<double>(n_types)));
    n_int = std::min(n_int, n_types);

    ProtoNoiseVector pn;
    pn.sigma2.assign(b.cols(), sigma_n2);
    for (std::size_t i = 0; i < n_int; ++i) {
        const std::size_t idx =
            side == Side::Begin ? unp[i] : unp[n_types - 1 - i];
        pn.sigma2[idx] = sigma_n2 + sigma_i2;
    }
    const double eff = static_cast<double>(n_int) / static_cast<double>(n_types);
    return {std::move(pn), eff};
}

} // namespace asyncra::analysis
