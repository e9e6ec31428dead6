// Acceptance suite: one check per numbered criterion, each printing a
// single PASS/FAIL line. Exit status is the number of failed criteria.
//
// usage: acceptance [--only N]... [--full] [--threads N]

#include "asyncra/analysis.hpp"
#include "asyncra/channel.hpp"
#include "asyncra/codec.hpp"
#include "asyncra/optimizer.hpp"
#include "asyncra/pexit.hpp"
#include "asyncra/protograph.hpp"
#include "asyncra/qde.hpp"
#include "asyncra/rasim.hpp"
#include "asyncra/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

using namespace asyncra;

namespace {

constexpr double kSigma6dB = 0.12559432157547897; // Es/N0 = 6 dB, P = 1

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(5);
    ss << v;
    return ss.str();
}

// --- criterion 1: capacity anchor --------------------------------------

Outcome criterion1(bool, std::size_t) {
    const double cap = analysis::qpsk_capacity(0.5);
    const bool ok = std::abs(cap - 0.96) <= 0.02;
    return {ok, "C(0 dB) = " + fmt(cap) + " bits/symbol, target 0.96 +- 0.02"};
}

// --- criterion 2: begin/end symmetry of the ad-hoc design ---------------

Outcome criterion2(bool, std::size_t) {
    const auto b = proto::builtin(proto::Builtin::AdHoc);
    std::string detail;
    bool ok = true;
    for (double a : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        const auto beg = pexit::pexit_interference_threshold(
            b, a, analysis::Side::Begin, kSigma6dB);
        const auto end = pexit::pexit_interference_threshold(
            b, a, analysis::Side::End, kSigma6dB);
        bool match;
        if (beg.is_infinite() || end.is_infinite())
            match = beg.is_infinite() && end.is_infinite();
        else
            match = std::abs(beg.value - end.value) <=
                    1e-3 * std::max(beg.value, end.value);
        ok = ok && match;
        detail += "a=" + fmt(a) + ": b=" + fmt(beg.value) +
                  " e=" + fmt(end.value) + (match ? " ok; " : " MISMATCH; ");
    }
    return {ok, detail};
}

// --- criterion 3: interference-threshold ordering (Fig. 5 scale) --------

Outcome criterion3(bool, std::size_t) {
    const auto ba = proto::builtin(proto::Builtin::AdHoc);
    const auto b5 = proto::builtin(proto::Builtin::FiveG);
    const auto b5p = proto::builtin(proto::Builtin::FiveGPermuted);

    const auto worse = [&](const proto::BaseMatrix& b, double a) {
        const auto beg = pexit::pexit_interference_threshold(
            b, a, analysis::Side::Begin, kSigma6dB);
        const auto end = pexit::pexit_interference_threshold(
            b, a, analysis::Side::End, kSigma6dB);
        return std::min(beg.value, end.value);
    };

    bool ok = true;
    std::string detail;
    for (double a : {0.6, 0.9}) {
        const double t_a = worse(ba, a);
        const double t_5p = worse(b5p, a);
        const double t_5 = worse(b5, a);
        const double lim =
            analysis::shannon_interference_limit(a, kSigma6dB, 1.0);
        const bool ord = t_a >= t_5p && t_5p >= t_5;
        const bool capped = t_a <= lim && t_5p <= lim && t_5 <= lim;
        ok = ok && ord && capped;
        detail += "a=" + fmt(a) + ": AdHoc=" + fmt(t_a) + " 5Gp=" + fmt(t_5p) +
                  " 5G=" + fmt(t_5) + " limit=" + fmt(lim) +
                  (ord && capped ? " ok; " : " VIOLATION; ");
    }
    // near full overlap the three designs behave alike
    const double u_a = worse(ba, 1.0), u_5p = worse(b5p, 1.0),
                 u_5 = worse(b5, 1.0);
    const double lo = std::min({u_a, u_5p, u_5});
    const double hi = std::max({u_a, u_5p, u_5});
    const bool close = (hi - lo) <= 0.05 * hi;
    ok = ok && close;
    detail += "a=1: " + fmt(u_a) + "/" + fmt(u_5p) + "/" + fmt(u_5) +
              (close ? " within 5%" : " SPREAD EXCEEDS 5%");
    return {ok, detail};
}

// --- criterion 4: QDE interferer-model ordering (Fig. 6 scale) ----------

Outcome criterion4(bool, std::size_t threads) {
    const auto b = proto::builtin(proto::Builtin::AdHoc);
    qde::QdeOptions opts;
    struct Job {
        double alpha;
        qde::InterfererModel model;
        double value = 0.0;
    };
    std::vector<Job> jobs;
    for (double a : {0.2, 0.5, 0.8})
        for (auto m :
             {qde::InterfererModel::Gaussian,
              qde::InterfererModel::QpskPhaseAligned,
              qde::InterfererModel::QpskRandomPhase})
            jobs.push_back({a, m});

    std::size_t next = 0;
    while (next < jobs.size()) {
        const std::size_t batch = std::min(threads, jobs.size() - next);
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < batch; ++t)
            pool.emplace_back([&jobs, i = next + t, &b, &opts]() {
                jobs[i].value =
                    qde::qde_threshold(b, jobs[i].model, jobs[i].alpha, opts)
                        .value;
            });
        for (auto& th : pool) th.join();
        next += batch;
    }

    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < jobs.size(); i += 3) {
        const double g = jobs[i].value, p = jobs[i + 1].value,
                     r = jobs[i + 2].value;
        const double margin = opts.bisect_rel_tol;
        const bool strict = r > p * (1.0 + margin) && p > g * (1.0 + margin);
        ok = ok && strict;
        detail += "a=" + fmt(jobs[i].alpha) + ": rand=" + fmt(r) +
                  " phase0=" + fmt(p) + " gauss=" + fmt(g) +
                  (strict ? " ok; " : " ORDER VIOLATION; ");
    }
    return {ok, detail};
}

// --- criteria 5/6 shared machinery ---------------------------------------

struct Curve {
    std::vector<sim::SimReport> reports;
    const sim::SimReport& at(double g) const {
        for (const auto& r : reports)
            if (std::abs(r.load - g) < 1e-9) return r;
        throw std::logic_error("load missing from curve");
    }
};

Curve run_curve(sim::Mode mode, const proto::BaseMatrix* base,
                const codec::CodeInstance* code, double beta,
                const std::vector<double>& loads, std::size_t users,
                std::size_t threads, std::uint64_t seed) {
    sim::ProtocolConfig tmpl;
    tmpl.seed = seed;
    tmpl.beta = beta;
    sim::SimInputs in;
    in.base = base;
    in.code = code;
    std::vector<sim::SimReport> reports(loads.size());
    std::size_t next = 0;
    while (next < loads.size()) {
        const std::size_t batch = std::min(threads, loads.size() - next);
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < batch; ++t)
            pool.emplace_back([&, idx = next + t]() {
                sim::ProtocolConfig cfg = tmpl;
                cfg.load = loads[idx];
                cfg.horizon_tp = static_cast<double>(users) / cfg.load +
                                 2.0 * cfg.window_tp + 100.0;
                cfg.seed = mix_seed(seed, idx + 1);
                reports[idx] = sim::run(cfg, mode, in);
            });
        for (auto& th : pool) th.join();
        next += batch;
    }
    return {std::move(reports)};
}

bool ci_overlap(const sim::SimReport& a, const sim::SimReport& b) {
    return a.ci_low <= b.ci_high && b.ci_low <= a.ci_high;
}

Outcome criterion5(bool, std::size_t threads) {
    const auto ba = proto::builtin(proto::Builtin::AdHoc);
    const auto b5 = proto::builtin(proto::Builtin::FiveG);
    const auto b5p = proto::builtin(proto::Builtin::FiveGPermuted);
    const std::vector<double> loads = {0.7, 0.8, 0.9, 1.0, 1.1, 1.2};
    const std::size_t users = 20000;

    const auto c_a =
        run_curve(sim::Mode::AbstractLdpc, &ba, nullptr, 1.0, loads, users,
                  threads, 101);
    const auto c_5p =
        run_curve(sim::Mode::AbstractLdpc, &b5p, nullptr, 1.0, loads, users,
                  threads, 102);
    const auto c_5 =
        run_curve(sim::Mode::AbstractLdpc, &b5, nullptr, 1.0, loads, users,
                  threads, 103);
    const auto c_b95 =
        run_curve(sim::Mode::AbstractRandom, nullptr, nullptr, 0.95,
                  {0.8, 0.9}, users, threads, 104);

    std::string detail;
    // (a) strict ordering at G = 0.9 with non-overlapping intervals for the
    // ad-hoc advantage; the permuted design may tie with plain 5G
    const auto &a9 = c_a.at(0.9), &p9 = c_5p.at(0.9), &f9 = c_5.at(0.9);
    const bool part_a = a9.ci_high < p9.ci_low &&
                        (p9.plr <= f9.plr || ci_overlap(p9, f9));
    detail += "G=0.9 plr: AdHoc=" + fmt(a9.plr) + " 5Gp=" + fmt(p9.plr) +
              " 5G=" + fmt(f9.plr) + (part_a ? " ok; " : " VIOLATION; ");

    // (b) supported load at 1e-2
    const auto l_a = sim::supported_load(c_a.reports, 1e-2);
    const auto l_5p = sim::supported_load(c_5p.reports, 1e-2);
    const auto l_5 = sim::supported_load(c_5.reports, 1e-2);
    const bool part_b = l_a && std::abs(*l_a - 1.0) <= 0.1 && l_5p &&
                        std::abs(*l_5p - 0.9) <= 0.1 && l_5 &&
                        std::abs(*l_5 - 0.9) <= 0.1;
    detail += "load@1e-2: AdHoc=" + (l_a ? fmt(*l_a) : "none") +
              " (1.0 +- 0.1), 5Gp=" + (l_5p ? fmt(*l_5p) : "none") +
              " 5G=" + (l_5 ? fmt(*l_5) : "none") + " (0.9 +- 0.1)" +
              (part_b ? " ok; " : " VIOLATION; ");

    // (c) the 95%-of-capacity ensemble rides the permuted-5G curve
    const bool part_c = ci_overlap(c_b95.at(0.8), c_5p.at(0.8)) &&
                        ci_overlap(c_b95.at(0.9), c_5p.at(0.9));
    detail += "beta=0.95 vs 5Gp plr@0.8: " + fmt(c_b95.at(0.8).plr) + "/" +
              fmt(c_5p.at(0.8).plr) + ", @0.9: " + fmt(c_b95.at(0.9).plr) +
              "/" + fmt(c_5p.at(0.9).plr) +
              (part_c ? " overlap ok" : " NO OVERLAP");

    return {part_a && part_b && part_c, detail};
}

Outcome criterion6(bool full, std::size_t threads) {
    const auto ba = proto::builtin(proto::Builtin::AdHoc);
    const auto b5 = proto::builtin(proto::Builtin::FiveG);
    const auto b5p = proto::builtin(proto::Builtin::FiveGPermuted);
    const auto code_a = codec::lift(ba, 96, 7);
    const auto code_5 = codec::lift(b5, 48, 7);
    const auto code_5p = codec::lift(b5p, 48, 7);

    // full depth: the stated criterion (1e4 users, +-0.1); default: the
    // documented 10x smaller smoke preset with a widened +-0.15 band
    const std::size_t users = full ? 10000 : 1000;
    const double band = full ? 0.1 : 0.15;
    const std::vector<double> loads = {0.6, 0.7, 0.8, 0.9, 1.0};

    const auto c_a = run_curve(sim::Mode::Phy, nullptr, &code_a, 1.0, loads,
                               users, threads, 201);
    const auto c_5p = run_curve(sim::Mode::Phy, nullptr, &code_5p, 1.0, loads,
                                users, threads, 202);
    const auto c_5 = run_curve(sim::Mode::Phy, nullptr, &code_5, 1.0, loads,
                               users, threads, 203);
    const auto c_abs = run_curve(sim::Mode::AbstractLdpc, &ba, nullptr, 1.0,
                                 loads, users, threads, 204);

    std::string detail = full ? "[full] " : "[smoke 10x reduced] ";
    const auto l_phy = sim::supported_load(c_a.reports, 1e-2);
    const auto l_abs = sim::supported_load(c_abs.reports, 1e-2);
    const bool part_a = l_phy && std::abs(*l_phy - 0.9) <= band;
    detail += "AdHoc phy load@1e-2 = " + (l_phy ? fmt(*l_phy) : "none") +
              " (0.9 +- " + fmt(band) + ")" + (part_a ? " ok; " : " VIOLATION; ");
    if (l_phy && l_abs)
        detail += "abstract-phy gap = " + fmt(*l_abs - *l_phy) + "; ";

    // relative ordering preserved in the loss region
    bool part_b = true;
    for (double g : {0.9, 1.0}) {
        const auto &ra = c_a.at(g), &rp = c_5p.at(g), &rf = c_5.at(g);
        const bool ord = (ra.plr < rp.plr || ci_overlap(ra, rp)) &&
                         (rp.plr < rf.plr || ci_overlap(rp, rf)) &&
                         ra.plr < rf.plr;
        part_b = part_b && ord;
        detail += "G=" + fmt(g) + " plr: " + fmt(ra.plr) + "/" + fmt(rp.plr) +
                  "/" + fmt(rf.plr) + (ord ? " ok; " : " ORDER VIOLATION; ");
    }

    // monotone trend in G within confidence bands
    bool part_c = true;
    for (std::size_t i = 1; i < loads.size(); ++i) {
        const auto &lo = c_a.at(loads[i - 1]), &hi = c_a.at(loads[i]);
        if (lo.plr > hi.plr && !ci_overlap(lo, hi)) part_c = false;
    }
    detail += part_c ? "monotone ok" : "MONOTONICITY VIOLATION";

    return {part_a && part_b && part_c, detail};
}

// --- criterion 7: fast property sweep ------------------------------------

Outcome criterion7(bool, std::size_t) {
    std::string detail;
    bool ok = true;
    const auto check = [&](bool cond, const char* what) {
        ok = ok && cond;
        detail += std::string(what) + (cond ? " ok; " : " FAIL; ");
    };

    // matrices, rates, symmetry, permutations
    const auto ba = proto::builtin(proto::Builtin::AdHoc);
    const auto b5 = proto::builtin(proto::Builtin::FiveG);
    check(proto::design_rate(ba) == proto::Rational(1, 2) &&
              proto::design_rate(b5) == proto::Rational(1, 2),
          "rate identities");
    check(proto::is_edge_symmetric(ba) && !proto::is_edge_symmetric(b5),
          "symmetry outcomes");
    const auto pi = proto::fiveg_permutation();
    check(proto::permute_columns(proto::permute_columns(b5, pi),
                                 pi.inverse()) == b5,
          "permutation round trip");

    // codec linearity and noiseless decoding on a small lift
    const auto code = codec::lift(ba, 24, 3);
    Rng rng(5);
    std::vector<std::uint8_t> u(code.k()), v(code.k());
    for (auto& x : u) x = static_cast<std::uint8_t>(rng.bits() & 1);
    for (auto& x : v) x = static_cast<std::uint8_t>(rng.bits() & 1);
    const auto cu = code.encode(u), cv = code.encode(v);
    std::vector<std::uint8_t> uv(code.k());
    for (std::size_t i = 0; i < u.size(); ++i) uv[i] = u[i] ^ v[i];
    const auto cuv = code.encode(uv);
    bool linear = code.syndrome_weight(cu) == 0;
    for (std::size_t i = 0; i < cuv.size(); ++i)
        linear = linear && cuv[i] == (cu[i] ^ cv[i]);
    check(linear, "codec linearity");
    std::vector<double> llr(code.n_total(), 0.0);
    for (std::size_t t = 0; t < code.n_tx(); ++t) {
        const auto b = code.tx_to_var(t);
        llr[b] = cu[b] ? -40.0 : 40.0;
    }
    const auto dec = code.bp_decode(llr, 20);
    check(dec.success && dec.bits == cu, "noiseless decoding");

    // LLR consistency: E[exp(-L)] = 1 under the matched channel
    {
        Rng mc(31);
        const auto& pts = channel::QpskConstellation::points();
        double acc = 0.0;
        const int n = 50000;
        for (int i = 0; i < n; ++i) {
            const auto y = pts[0] + pts[mc.below(4)] +
                           channel::cplx(std::sqrt(0.5) * mc.normal(),
                                         std::sqrt(0.5) * mc.normal());
            acc += std::exp(
                -channel::llr_single_interferer(y, 0.0, 0.0, 0.5).first);
        }
        check(std::abs(acc / n - 1.0) < 0.15, "LLR consistency");
    }

    // region nesting D' inside D and monotone degradation
    {
        const double lim =
            analysis::shannon_interference_limit(0.9, kSigma6dB, 1.0);
        bool nest = true, mono = true;
        for (double f : {0.3, 0.8, 0.95, 0.99, 1.05, 1.5}) {
            const analysis::InterferencePattern p({{0.9, kSigma6dB + f * lim}},
                                                  kSigma6dB);
            const bool in1 = analysis::region_random(p, 1.0, 1.0);
            const bool in95 = analysis::region_random(p, 1.0, 0.95);
            if (in95 && !in1) nest = false;
        }
        double prev_ok = true;
        for (double f : {0.5, 0.9, 1.1, 2.0}) {
            const analysis::InterferencePattern p({{0.9, kSigma6dB + f * lim}},
                                                  kSigma6dB);
            const bool in1 = analysis::region_random(p, 1.0, 1.0);
            if (in1 && !prev_ok) mono = false;
            prev_ok = in1;
        }
        check(nest, "region nesting");
        check(mono, "region monotone");
    }

    // DE history monotone on a tiny shape
    {
        opt::DeConfig cfg;
        cfg.n_b = 5;
        cfg.m_b = 2;
        cfg.p_b = 1;
        cfg.population = 6;
        cfg.generations = 3;
        cfg.max_entry = 2;
        cfg.alphas = {0.75};
        cfg.seed = 9;
        cfg.analysis.bisect_rel_tol = 1e-2;
        cfg.analysis.max_iter = 200;
        const auto res = opt::evolve(cfg);
        bool mono = true;
        for (std::size_t g = 1; g < res.history.size(); ++g)
            if (res.history[g] < res.history[g - 1]) mono = false;
        check(mono && proto::is_edge_symmetric(res.best),
              "DE history monotone");
    }

    // simulator determinism
    {
        sim::ProtocolConfig cfg;
        cfg.load = 1.0;
        cfg.n_s = 40;
        cfg.horizon_tp = 2000.0;
        cfg.seed = 3;
        const auto a = sim::run(cfg, sim::Mode::AbstractRandom);
        const auto b = sim::run(cfg, sim::Mode::AbstractRandom);
        check(a.finalized == b.finalized && a.lost == b.lost &&
                  a.decode_attempts == b.decode_attempts,
              "simulator determinism");
    }

    return {ok, detail};
}

// --- criterion 8: cross-method oracles -----------------------------------

Outcome criterion8(bool, std::size_t threads) {
    std::string detail;
    bool ok = true;

    // (a) Gaussian-model QDE noise threshold vs the PEXIT counterpart
    const auto ba = proto::builtin(proto::Builtin::AdHoc);
    struct Pair {
        double alpha;
        double qde = 0.0, pexit = 0.0;
    };
    std::vector<Pair> pairs = {{0.5}, {0.8}};
    {
        std::vector<std::thread> pool;
        const std::size_t n = std::min<std::size_t>(threads, pairs.size());
        std::size_t next = 0;
        while (next < pairs.size()) {
            pool.clear();
            for (std::size_t t = 0; t < n && next + t < pairs.size(); ++t)
                pool.emplace_back([&pairs, i = next + t, &ba]() {
                    pairs[i].qde =
                        qde::qde_threshold(ba, qde::InterfererModel::Gaussian,
                                           pairs[i].alpha)
                            .value;
                    pairs[i].pexit = pexit::pexit_noise_threshold(
                                         ba, pairs[i].alpha,
                                         analysis::Side::Begin)
                                         .value;
                });
            for (auto& th : pool) th.join();
            next += n;
        }
    }
    for (const auto& p : pairs) {
        const double gap_db = std::abs(10.0 * std::log10(p.qde / p.pexit));
        const bool close = gap_db <= 0.1;
        ok = ok && close;
        detail += "a=" + fmt(p.alpha) + ": qde=" + fmt(p.qde) +
                  " pexit=" + fmt(p.pexit) + " gap=" + fmt(gap_db) + " dB" +
                  (close ? " ok; " : " EXCEEDS 0.1 dB; ");
    }

    // (b) decoding-region membership agrees with the Shannon-limit inversion
    {
        const double lim =
            analysis::shannon_interference_limit(0.5, kSigma6dB, 1.0);
        bool agree = true;
        for (double s : {0.2, 0.6, 0.95, 1.05, 2.0}) {
            const double sig = std::isinf(lim) ? s : s * lim;
            const analysis::InterferencePattern p({{0.5, kSigma6dB + sig}},
                                                  kSigma6dB);
            const bool in_region = analysis::region_random(p, 1.0, 1.0);
            const bool below = std::isinf(lim) || sig < lim;
            agree = agree && in_region == below;
        }
        ok = ok && agree;
        detail += std::string("region vs limit ") + (agree ? "ok; " : "FAIL; ");
    }

    // (c) phase-quadrature doubling stays below 1e-6 relative
    {
        bool stable = true;
        double worst = 0.0;
        for (double yr = -2.0; yr <= 2.0; yr += 0.5)
            for (double yi = -2.0; yi <= 2.0; yi += 0.5) {
                const channel::cplx y(yr, yi);
                // the operation itself refines until the doubling check
                // passes and throws otherwise
                const auto q =
                    channel::llr_single_interferer_random_phase(y, kSigma6dB);
                const auto bessel =
                    channel::llr_single_interferer_random_phase_bessel(
                        y, kSigma6dB);
                const double rel =
                    std::abs(q.first - bessel.first) /
                    std::max(1.0, std::abs(bessel.first));
                worst = std::max(worst, rel);
                if (rel > 1e-5) stable = false;
            }
        ok = ok && stable;
        detail += "quadrature vs closed form worst rel " + fmt(worst) +
                  (stable ? " ok" : " FAIL");
    }

    return {ok, detail};
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    bool full = false;
    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
            only.insert(std::atoi(argv[++i]));
        else if (std::strcmp(argv[i], "--full") == 0)
            full = true;
        else if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc)
            threads = static_cast<std::size_t>(std::atoll(argv[++i]));
        else {
            std::cerr << "usage: acceptance [--only N]... [--full] "
                         "[--threads N]\n";
            return 2;
        }
    }

    struct Criterion {
        int id;
        const char* name;
        Outcome (*run)(bool, std::size_t);
    };
    const Criterion criteria[] = {
        {1, "capacity anchor", criterion1},
        {2, "begin/end threshold symmetry", criterion2},
        {3, "interference-threshold ordering vs capacity", criterion3},
        {4, "QDE interferer-model ordering", criterion4},
        {5, "abstracted-PHY packet loss targets", criterion5},
        {6, "full-PHY packet loss targets", criterion6},
        {7, "property sweep", criterion7},
        {8, "cross-method oracles", criterion8},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && only.count(c.id) == 0) continue;
        Outcome out{false, "exception"};
        try {
            out = c.run(full, threads);
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << c.id
                  << " (" << c.name << "): " << out.detail << std::endl;
        if (!out.pass) ++failures;
    }
    return failures;
}
