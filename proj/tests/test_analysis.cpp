#include <doctest.h>

#include "asyncra/analysis.hpp"
#include "asyncra/pexit.hpp"
#include "asyncra/protograph.hpp"

#include <cmath>

using namespace asyncra;
using analysis::InterferencePattern;
using analysis::Side;

namespace {

// independent oracle: 2-D trapezoid integration of the QPSK mutual
// information over the complex plane
double capacity_oracle(double sigma2) {
    const double a = 1.0 / std::sqrt(2.0);
    const double pts[4][2] = {{a, a}, {-a, a}, {-a, -a}, {a, -a}};
    const double L = 8.0 * std::sqrt(sigma2) + 1.5;
    const int n = 801;
    const double h = 2.0 * L / (n - 1);
    double mi = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double yr = -L + h * i, yi = -L + h * j;
            double f[4], fy = 0.0;
            for (int k = 0; k < 4; ++k) {
                const double d2 = (yr - pts[k][0]) * (yr - pts[k][0]) +
                                  (yi - pts[k][1]) * (yi - pts[k][1]);
                f[k] = std::exp(-d2 / (2.0 * sigma2)) /
                       (2.0 * 3.14159265358979323846 * sigma2);
                fy += 0.25 * f[k];
            }
            double cell = 0.0;
            for (int k = 0; k < 4; ++k)
                if (f[k] > 0.0 && fy > 0.0)
                    cell += 0.25 * f[k] * std::log2(f[k] / fy);
            const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
            const double wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
            mi += wi * wj * cell;
        }
    return mi * h * h;
}

constexpr double kSigma6dB = 0.12559432157547897;

} // namespace

TEST_CASE("qpsk capacity: limits, anchor and oracle agreement") {
    CHECK(analysis::qpsk_capacity(1e-6) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(analysis::qpsk_capacity(1e4) < 1e-3);
    CHECK_THROWS(analysis::qpsk_capacity(0.0));
    CHECK_THROWS(analysis::qpsk_capacity(-1.0));

    // unit signal-to-noise: the 0.96 bits/symbol anchor
    CHECK(analysis::qpsk_capacity(0.5) == doctest::Approx(0.96).epsilon(0.021));
    // frozen high-precision value of the quadrature itself
    CHECK(analysis::qpsk_capacity(0.5) ==
          doctest::Approx(0.9718883083).epsilon(1e-6));

    for (double s2 : {0.1255943215754790, 0.3, 0.5, 1.0})
        CHECK(analysis::qpsk_capacity(s2) ==
              doctest::Approx(capacity_oracle(s2)).epsilon(2e-4));

    // strictly decreasing
    double prev = 2.0;
    for (double s2 = 0.05; s2 < 4.0; s2 *= 1.4) {
        const double c = analysis::qpsk_capacity(s2);
        CHECK(c < prev);
        prev = c;
    }
}

TEST_CASE("interference patterns and outage capacity") {
    SUBCASE("degenerate patterns") {
        const InterferencePattern empty({}, kSigma6dB);
        CHECK(analysis::outage_capacity(empty) ==
              doctest::Approx(analysis::qpsk_capacity(kSigma6dB)));
        // alpha = 0 entry behaves as absent
        const InterferencePattern zero({{0.0, kSigma6dB + 0.5}}, kSigma6dB);
        CHECK(analysis::outage_capacity(zero) ==
              doctest::Approx(analysis::qpsk_capacity(kSigma6dB)));
        // alpha = 1 single block
        const InterferencePattern full({{1.0, kSigma6dB + 0.5}}, kSigma6dB);
        CHECK(analysis::outage_capacity(full) ==
              doctest::Approx(analysis::qpsk_capacity(kSigma6dB + 0.5)));
    }

    SUBCASE("two-block weighting against the scalar oracle") {
        const InterferencePattern p(
            {{0.3, kSigma6dB + 0.5}, {0.2, kSigma6dB + 1.0}}, kSigma6dB);
        const double expect = 0.5 * analysis::qpsk_capacity(kSigma6dB) +
                              0.3 * analysis::qpsk_capacity(kSigma6dB + 0.5) +
                              0.2 * analysis::qpsk_capacity(kSigma6dB + 1.0);
        CHECK(analysis::outage_capacity(p) == doctest::Approx(expect));
        const double lo = analysis::qpsk_capacity(kSigma6dB + 1.0);
        const double hi = analysis::qpsk_capacity(kSigma6dB);
        CHECK(analysis::outage_capacity(p) > lo);
        CHECK(analysis::outage_capacity(p) < hi);
    }

    SUBCASE("invariants rejected") {
        CHECK_THROWS(InterferencePattern({{0.5, kSigma6dB}}, kSigma6dB));
        CHECK_THROWS(InterferencePattern(
            {{0.5, kSigma6dB + 1.0}, {0.6, kSigma6dB + 0.5}}, kSigma6dB));
        CHECK_THROWS(InterferencePattern(
            {{0.7, kSigma6dB + 0.5}, {0.7, kSigma6dB + 1.0}}, kSigma6dB));
    }

    SUBCASE("construction from interferer counts") {
        const std::vector<std::uint32_t> counts = {0, 0, 1, 1, 1, 2, 0, 0, 0, 0};
        const auto p = InterferencePattern::from_counts(counts, kSigma6dB);
        REQUIRE(p.blocks.size() == 2);
        CHECK(p.blocks[0].alpha == doctest::Approx(0.3));
        CHECK(p.blocks[0].sigma2 == doctest::Approx(kSigma6dB + 0.5));
        CHECK(p.blocks[1].alpha == doctest::Approx(0.1));
        CHECK(p.blocks[1].sigma2 == doctest::Approx(kSigma6dB + 1.0));
    }
}

TEST_CASE("Shannon interference limit") {
    SUBCASE("no margin at the rate boundary") {
        // alpha = 1, R = C(sigma_n2): limit is zero
        const double rate = analysis::qpsk_capacity(kSigma6dB);
        CHECK(analysis::shannon_interference_limit(1.0, kSigma6dB, rate) ==
              doctest::Approx(0.0).epsilon(1e-5));
    }

    SUBCASE("infeasible rate throws") {
        CHECK_THROWS(analysis::shannon_interference_limit(0.5, kSigma6dB, 2.5));
    }

    SUBCASE("small alpha leaves infinite margin") {
        // (1 - alpha) C(sigma_n2) >= 1 for alpha <= 1 - 1/C
        CHECK(std::isinf(
            analysis::shannon_interference_limit(0.3, kSigma6dB, 1.0)));
    }

    SUBCASE("bisection against the defining equation") {
        for (double a : {0.6, 0.9, 1.0}) {
            const double lim =
                analysis::shannon_interference_limit(a, kSigma6dB, 1.0);
            REQUIRE(std::isfinite(lim));
            const double co =
                (1.0 - a) * analysis::qpsk_capacity(kSigma6dB) +
                a * analysis::qpsk_capacity(kSigma6dB + lim);
            CHECK(co == doctest::Approx(1.0).epsilon(1e-5));
        }
    }

    SUBCASE("monotone non-increasing in alpha") {
        double prev = std::numeric_limits<double>::infinity();
        for (double a = 0.5; a <= 1.0; a += 0.05) {
            const double lim =
                analysis::shannon_interference_limit(a, kSigma6dB, 1.0);
            CHECK(lim <= prev + 1e-9);
            prev = lim;
        }
    }
}

TEST_CASE("random-ensemble decoding region") {
    SUBCASE("clean channel and beta nesting") {
        const InterferencePattern empty({}, kSigma6dB);
        CHECK(analysis::region_random(empty, 1.0, 1.0));
        CHECK(analysis::region_random(empty, 1.0, 0.95));
        CHECK_FALSE(analysis::region_random(empty, 2.5, 1.0));

        // boundary-adjacent pattern: in D at beta 1, outside D' at 0.95
        const double lim =
            analysis::shannon_interference_limit(0.9, kSigma6dB, 1.0);
        const InterferencePattern edge({{0.9, kSigma6dB + 0.98 * lim}},
                                       kSigma6dB);
        CHECK(analysis::region_random(edge, 1.0, 1.0));
        CHECK_FALSE(analysis::region_random(edge, 1.0, 0.95));
    }

    SUBCASE("membership agrees with the Shannon limit code path") {
        const double lim =
            analysis::shannon_interference_limit(0.5, kSigma6dB, 1.0);
        for (double s : {0.25, 0.5, 0.9, 1.2, 3.0}) {
            const InterferencePattern p({{0.5, kSigma6dB + s}}, kSigma6dB);
            const bool in_region = analysis::region_random(p, 1.0, 1.0);
            const bool below_limit = std::isinf(lim) || s < lim;
            CHECK(in_region == below_limit);
        }
    }
}

TEST_CASE("J-function fit accuracy against quadrature") {
    // oracle: 2000-point trapezoid over the consistent Gaussian LLR law
    const auto j_oracle = [](double sigma) {
        if (sigma < 1e-8) return 0.0;
        const double mu = sigma * sigma / 2.0;
        const int n = 4001;
        const double lo = mu - 10.0 * sigma, hi = mu + 10.0 * sigma;
        const double h = (hi - lo) / (n - 1);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const double l = lo + h * i;
            const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
            const double pdf = std::exp(-(l - mu) * (l - mu) /
                                        (2.0 * sigma * sigma)) /
                               (sigma * std::sqrt(2.0 * 3.141592653589793));
            const double loss = l > 35 ? std::exp(-l) / std::log(2.0)
                                       : std::log2(1.0 + std::exp(-l));
            acc += w * pdf * loss;
        }
        return 1.0 - acc * h;
    };
    double max_err = 0.0;
    for (double s = 0.01; s <= 11.0; s += 0.01)
        max_err = std::max(max_err,
                           std::abs(pexit::j_function(s) - j_oracle(s)));
    CHECK(max_err < 1e-4);

    // inverse consistency and monotonicity
    for (double i = 0.001; i < 0.9999; i += 0.007)
        CHECK(pexit::j_function(pexit::j_inverse(i)) ==
              doctest::Approx(i).epsilon(1e-9));
    double prev = -1.0;
    for (double s = 0.0; s < 11.0; s += 0.003) {
        const double j = pexit::j_function(s);
        CHECK(j >= prev);
        prev = j;
    }
}

TEST_CASE("pexit convergence endpoints") {
    const auto b = proto::builtin(proto::Builtin::AdHoc);

    analysis::ProtoNoiseVector perfect;
    perfect.sigma2.assign(11, 1e-9);
    CHECK(pexit::pexit_converges(b, perfect));

    analysis::ProtoNoiseVector hopeless;
    hopeless.sigma2.assign(11, 1e9);
    CHECK_FALSE(pexit::pexit_converges(b, hopeless));

    // 6 dB, no interference: far above the rate-1/2 threshold
    analysis::ProtoNoiseVector clean;
    clean.sigma2.assign(11, kSigma6dB);
    CHECK(pexit::pexit_converges(b, clean));

    // all unpunctured types pushed 5 sigma^2 above the noise floor: well
    // below the alpha = 1 threshold
    analysis::ProtoNoiseVector jammed;
    jammed.sigma2.assign(11, kSigma6dB + 5.0);
    jammed.sigma2[0] = kSigma6dB; // punctured entry ignored anyway
    CHECK_FALSE(pexit::pexit_converges(b, jammed));

    CHECK_THROWS(pexit::pexit_converges(
        b, analysis::ProtoNoiseVector{{0.1, 0.1}}));
}

TEST_CASE("ldpc decoding region monotone under degradation") {
    const auto b = proto::builtin(proto::Builtin::AdHoc);
    // bracket the alpha = 1 threshold coarsely, then check that raising any
    // single type's variance never turns failure into success
    const auto thr = pexit::pexit_interference_threshold(b, 1.0, Side::Begin,
                                                         kSigma6dB);
    REQUIRE(thr.converged);
    analysis::ProtoNoiseVector pn;
    pn.sigma2.assign(11, kSigma6dB + thr.value * 1.02);
    CHECK_FALSE(pexit::region_ldpc(b, pn));
    for (std::size_t j = 1; j < 11; ++j) {
        auto worse = pn;
        worse.sigma2[j] += 1.0;
        CHECK_FALSE(pexit::region_ldpc(b, worse));
    }
    // and the convergent side stays convergent when any type improves
    pn.sigma2.assign(11, kSigma6dB + thr.value * 0.98);
    CHECK(pexit::region_ldpc(b, pn));
    for (std::size_t j = 1; j < 11; ++j) {
        auto better = pn;
        better.sigma2[j] = kSigma6dB;
        CHECK(pexit::region_ldpc(b, better));
    }
}

TEST_CASE("noise vector construction and effective alpha") {
    const auto b = proto::builtin(proto::Builtin::AdHoc);
    const auto [pn, eff] =
        analysis::make_noise_vector(b, 0.6, Side::Begin, 0.1, 2.0);
    CHECK(eff == doctest::Approx(0.6));
    // 6 of 10 unpunctured types interfered, from the begin side; the
    // punctured column 0 keeps the floor entry
    CHECK(pn.sigma2[0] == doctest::Approx(0.1));
    for (std::size_t j = 1; j <= 6; ++j)
        CHECK(pn.sigma2[j] == doctest::Approx(2.1));
    for (std::size_t j = 7; j <= 10; ++j)
        CHECK(pn.sigma2[j] == doctest::Approx(0.1));

    const auto [pn_end, eff_end] =
        analysis::make_noise_vector(b, 0.25, Side::End, 0.1, 2.0);
    CHECK(eff_end == doctest::Approx(0.3)); // rounded to the type grid
    CHECK(pn_end.sigma2[10] == doctest::Approx(2.1));
    CHECK(pn_end.sigma2[8] == doctest::Approx(2.1));
    CHECK(pn_end.sigma2[7] == doctest::Approx(0.1));
}

TEST_CASE("gain: symmetry shortcut and range") {
    const auto a = proto::builtin(proto::Builtin::AdHoc);
    const std::vector<double> alphas = {0.6, 0.9};
    pexit::PexitOptions fast;
    fast.bisect_rel_tol = 1e-3;
    const double g = pexit::gain(a, alphas, kSigma6dB, fast);
    CHECK(g > 0.0);
    CHECK(g <= 1.0);

    // thresholds stay below the Shannon limit at each target alpha
    for (double al : alphas) {
        const double lim =
            analysis::shannon_interference_limit(al, kSigma6dB, 1.0);
        const auto thr = pexit::pexit_interference_threshold(
            a, al, Side::Begin, kSigma6dB, fast);
        CHECK(thr.value <= lim);
    }

    CHECK_THROWS(pexit::gain(a, std::vector<double>{}, kSigma6dB));
    // infinite Shannon limit at small alpha is rejected
    CHECK_THROWS(pexit::gain(a, std::vector<double>{0.2}, kSigma6dB));
}
