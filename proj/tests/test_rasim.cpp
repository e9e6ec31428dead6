#include <doctest.h>

#include "asyncra/channel.hpp"
#include "asyncra/codec.hpp"
#include "asyncra/kernels.hpp"
#include "asyncra/rasim.hpp"
#include "asyncra/rng.hpp"

#include <algorithm>
#include <cmath>

using namespace asyncra;

namespace {

sim::ProtocolConfig small_cfg() {
    sim::ProtocolConfig cfg;
    cfg.load = 0.5;
    cfg.n_s = 40; // small packets keep the unit suite quick
    cfg.horizon_tp = 3000.0;
    cfg.seed = 5;
    return cfg;
}

} // namespace

TEST_CASE("arrival process is Poisson with intensity G") {
    sim::ProtocolConfig cfg = small_cfg();
    cfg.load = 0.5;
    cfg.horizon_tp = 10000.0;
    Rng rng(77);
    const auto times = sim::gen_arrivals(cfg, rng);

    // mean count within 4 sigma
    const double expect = cfg.load * cfg.horizon_tp;
    CHECK(std::abs(static_cast<double>(times.size()) - expect) <
          4.0 * std::sqrt(expect));

    // ordered and in range
    for (std::size_t i = 1; i < times.size(); ++i)
        CHECK(times[i] > times[i - 1]);
    CHECK(times.front() >= 0.0);
    CHECK(times.back() < cfg.horizon_tp);

    // empty-interval probability e^{-G}: count unit intervals with no arrival
    std::vector<int> counts(static_cast<std::size_t>(cfg.horizon_tp), 0);
    for (double t : times) ++counts[static_cast<std::size_t>(t)];
    double empty = 0.0;
    for (int c : counts) empty += c == 0;
    empty /= static_cast<double>(counts.size());
    CHECK(empty == doctest::Approx(std::exp(-cfg.load)).epsilon(0.03));

    // disjoint intervals: vanishing empirical correlation of adjacent counts
    double m = 0.0;
    for (int c : counts) m += c;
    m /= static_cast<double>(counts.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i + 1 < counts.size(); ++i) {
        num += (counts[i] - m) * (counts[i + 1] - m);
        den += (counts[i] - m) * (counts[i] - m);
    }
    CHECK(std::abs(num / den) < 0.05);
}

TEST_CASE("replica placement respects the virtual frame rules") {
    sim::ProtocolConfig cfg = small_cfg();
    Rng rng(123);
    const auto tp = cfg.tp_symbols();
    const auto tf = static_cast<std::int64_t>(cfg.vf_tp * cfg.n_s);

    std::vector<double> gaps;
    for (int t = 0; t < 20000; ++t) {
        const auto [s1, s2] = sim::place_replicas(1000, cfg, rng);
        CHECK(s1 == 1000);
        const auto gap = s2 - s1;
        CHECK(gap > tp);                 // no self-interference
        CHECK(s2 + tp <= 1000 + tf);     // inside the virtual frame
        gaps.push_back(static_cast<double>(gap));
    }

    // Kolmogorov-Smirnov against the uniform law on (tp, tf - tp]
    std::sort(gaps.begin(), gaps.end());
    const double lo = static_cast<double>(tp), hi = static_cast<double>(tf - tp);
    double dmax = 0.0;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        const double cdf = (gaps[i] - lo) / (hi - lo);
        const double emp_hi = static_cast<double>(i + 1) / gaps.size();
        const double emp_lo = static_cast<double>(i) / gaps.size();
        dmax = std::max({dmax, std::abs(cdf - emp_hi), std::abs(cdf - emp_lo)});
    }
    // 1% critical value 1.63 / sqrt(n)
    CHECK(dmax < 1.63 / std::sqrt(static_cast<double>(gaps.size())));
}

TEST_CASE("config validation") {
    sim::ProtocolConfig cfg = small_cfg();
    cfg.replicas = 3;
    CHECK_THROWS(sim::run(cfg, sim::Mode::AbstractRandom));
    cfg = small_cfg();
    cfg.window_tp = 100.0; // smaller than the virtual frame
    CHECK_THROWS(sim::run(cfg, sim::Mode::AbstractRandom));
    cfg = small_cfg();
    CHECK_THROWS(sim::run(cfg, sim::Mode::Phy)); // missing CodeInstance
    CHECK_THROWS(sim::run(cfg, sim::Mode::AbstractLdpc)); // missing matrix
}

TEST_CASE("vanishing load loses nobody") {
    sim::ProtocolConfig cfg = small_cfg();
    cfg.load = 0.02;
    cfg.horizon_tp = 4000.0;

    const auto rep_rand = sim::run(cfg, sim::Mode::AbstractRandom);
    CHECK(rep_rand.finalized > 10);
    CHECK(rep_rand.lost == 0);

    const auto base = proto::builtin(proto::Builtin::AdHoc);
    sim::SimInputs in;
    in.base = &base;
    const auto rep_ldpc = sim::run(cfg, sim::Mode::AbstractLdpc, in);
    CHECK(rep_ldpc.finalized == rep_rand.finalized);
    CHECK(rep_ldpc.lost == 0);

    const auto code = codec::lift(base, 2 * cfg.n_s / 10, 7);
    sim::SimInputs in_phy;
    in_phy.code = &code;
    const auto rep_phy = sim::run(cfg, sim::Mode::Phy, in_phy);
    CHECK(rep_phy.finalized == rep_rand.finalized);
    CHECK(rep_phy.lost == 0);
}

TEST_CASE("conservation, determinism and SIC monotonicity") {
    sim::ProtocolConfig cfg = small_cfg();
    cfg.load = 1.2; // lossy regime
    std::vector<std::uint8_t> out_a, out_b;
    const auto a = sim::run(cfg, sim::Mode::AbstractRandom, {}, &out_a);
    const auto b = sim::run(cfg, sim::Mode::AbstractRandom, {}, &out_b);

    CHECK(a.finalized == a.decoded_users + a.lost);
    CHECK(a.lost > 0);
    CHECK(a.sic_monotone_ok);
    CHECK(out_a.size() == a.finalized);

    // bit-identical reports for identical config and seed
    CHECK(a.finalized == b.finalized);
    CHECK(a.lost == b.lost);
    CHECK(a.decode_attempts == b.decode_attempts);
    CHECK(out_a == out_b);

    // different seed shifts the tallies
    cfg.seed = 6;
    const auto c = sim::run(cfg, sim::Mode::AbstractRandom);
    CHECK(c.finalized != a.finalized);
}

TEST_CASE("beta = 1 region dominates beta < 1 user by user") {
    sim::ProtocolConfig cfg = small_cfg();
    cfg.load = 1.1;
    std::vector<std::uint8_t> strict, loose;
    cfg.beta = 0.95;
    const auto rep_strict = sim::run(cfg, sim::Mode::AbstractRandom, {}, &strict);
    cfg.beta = 1.0;
    const auto rep_loose = sim::run(cfg, sim::Mode::AbstractRandom, {}, &loose);

    REQUIRE(strict.size() == loose.size());
    for (std::size_t u = 0; u < strict.size(); ++u)
        if (strict[u]) CHECK(loose[u]); // decodable at 0.95 implies at 1.0
    CHECK(rep_loose.plr <= rep_strict.plr);
    CHECK(rep_strict.lost > rep_loose.lost);
}

TEST_CASE("phy cancellation leaves only the residual superposition") {
    // tiny scenario: verify through the public pieces that subtracting a
    // modulated replica from a superposition reproduces the rest
    Rng rng(9);
    const auto base = proto::builtin(proto::Builtin::AdHoc);
    const auto code = codec::lift(base, 4, 3); // n_tx = 40 bits, 20 symbols
    std::vector<std::uint8_t> info_a(code.k()), info_b(code.k());
    for (auto& x : info_a) x = static_cast<std::uint8_t>(rng.bits() & 1);
    for (auto& x : info_b) x = static_cast<std::uint8_t>(rng.bits() & 1);
    const auto cw_a = code.encode(info_a);
    const auto cw_b = code.encode(info_b);

    const auto tx_bits = [&](const std::vector<std::uint8_t>& cw) {
        std::vector<std::uint8_t> bits(code.n_tx());
        for (std::size_t t = 0; t < bits.size(); ++t)
            bits[t] = cw[code.tx_to_var(t)];
        return bits;
    };
    channel::ReplicaSignal ra{channel::qpsk_modulate(tx_bits(cw_a)), 0, 0.7};
    channel::ReplicaSignal rb{channel::qpsk_modulate(tx_bits(cw_b)), 7, 2.1};

    Rng noise_a(55), noise_b(55);
    const auto both =
        channel::superpose(std::vector{ra, rb}, 30, 0.1, noise_a);
    const auto only_b = channel::superpose(std::vector{rb}, 30, 0.1, noise_b);

    // subtract a's contribution from the superposition
    auto residual = both.samples;
    const auto& k = kernels::active();
    k.rotate_acc(reinterpret_cast<double*>(residual.data() + ra.start),
                 reinterpret_cast<const double*>(ra.symbols.data()),
                 -std::cos(ra.phase), -std::sin(ra.phase), ra.symbols.size());
    for (std::size_t i = 0; i < residual.size(); ++i)
        CHECK(std::abs(residual[i] - only_b.samples[i]) < 1e-12);
}

TEST_CASE("full phy pipeline decodes at moderate load") {
    sim::ProtocolConfig cfg = small_cfg();
    cfg.load = 0.4;
    cfg.n_s = 40;
    cfg.horizon_tp = 2500.0;
    const auto base = proto::builtin(proto::Builtin::AdHoc);
    const auto code = codec::lift(base, 2 * cfg.n_s / 10, 7);
    sim::SimInputs in;
    in.code = &code;
    const auto rep = sim::run(cfg, sim::Mode::Phy, in);
    CHECK(rep.finalized > 100);
    // isolated or singly-collided 6 dB packets decode: loss stays small
    CHECK(rep.plr < 0.2);
    CHECK(rep.decode_successes > 0);
    CHECK(rep.sic_monotone_ok);
}

TEST_CASE("plr curves: determinism per load and monotone trend") {
    sim::ProtocolConfig cfg = small_cfg();
    cfg.horizon_tp = 4000.0;
    const std::vector<double> loads = {0.4, 0.9, 0.9, 1.4};
    const auto curve =
        sim::plr_curve(cfg, loads, sim::Mode::AbstractRandom, {}, 2);
    REQUIRE(curve.size() == 4);

    // duplicate load, same derived seed: identical rows
    CHECK(curve[1].finalized == curve[2].finalized);
    CHECK(curve[1].lost == curve[2].lost);
    CHECK(curve[1].plr == curve[2].plr);

    // increasing trend within confidence margins
    CHECK(curve[0].plr <= curve[3].ci_high);
    CHECK(curve[0].ci_low <= curve[3].plr);
    CHECK(curve[0].plr < curve[3].plr);

    // supported-load interpolation brackets a crossing
    const auto at = sim::supported_load(curve, 0.5 * (curve[0].plr + 1e-9 +
                                                      curve[3].plr));
    if (curve[0].plr < 0.5 * curve[3].plr) {
        REQUIRE(at.has_value());
        CHECK(*at >= 0.4);
        CHECK(*at <= 1.4);
    }

    CHECK_THROWS(sim::plr_curve(cfg, std::vector<double>{},
                                sim::Mode::AbstractRandom));
}
