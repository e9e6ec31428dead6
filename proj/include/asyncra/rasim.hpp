#pragma once

#include "asyncra/codec.hpp"
#include "asyncra/pexit.hpp"
#include "asyncra/protograph.hpp"
#include "asyncra/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace asyncra::sim {

enum class Mode { AbstractRandom, AbstractLdpc, Phy };

Mode mode_from_name(const std::string& name);
const char* mode_name(Mode m);

struct ProtocolConfig {
    double load = 0.5;           // G, packet arrivals per packet duration t_p
    double vf_tp = 200.0;        // virtual frame t_f, in units of t_p
    double window_tp = 600.0;    // receiver window W
    double shift_tp = 20.0;      // window shift
    std::size_t n_s = 480;       // symbols per packet (t_p = n_s symbols)
    double es_n0_db = 6.0;
    double horizon_tp = 10000.0; // simulated time span
    std::size_t max_sic_iters = 0; // 0: iterate to the fixed point
    std::size_t replicas = 2;
    double beta = 1.0;           // abstract random-ensemble only
    std::size_t bp_max_iter = 50;
    std::uint64_t seed = 1;

    void validate() const;
    std::int64_t tp_symbols() const { return static_cast<std::int64_t>(n_s); }
    double sigma_n2() const;
};

struct SimReport {
    double load = 0.0;
    std::size_t finalized = 0;
    std::size_t lost = 0;
    std::size_t decoded_users = 0;
    double plr = 0.0, ci_low = 0.0, ci_high = 0.0; // Wilson 95%
    std::size_t decode_attempts = 0;
    std::size_t decode_successes = 0;
    std::vector<std::size_t> sic_pass_hist; // windows by SIC pass count
    bool sic_monotone_ok = true;
};

// exposed protocol primitives

// Poisson arrival times over [0, horizon), in units of t_p
std::vector<double> gen_arrivals(const ProtocolConfig& cfg, Rng& rng);

// replica start symbols for a user activating at t0 (symbols): first starts
// at t0, the second a uniform integer gap in (t_p, t_f - t_p] later
std::pair<std::int64_t, std::int64_t>
place_replicas(std::int64_t t0_sym, const ProtocolConfig& cfg, Rng& rng);

struct SimInputs {
    const proto::BaseMatrix* base = nullptr;  // abstract LDPC mode
    const codec::CodeInstance* code = nullptr; // full PHY mode
    pexit::PexitOptions pexit_opts;
};

// Sliding-window Monte Carlo of the replica/SIC protocol. Per-user outcomes
// (1 = recovered) for the tallied users land in user_outcomes when given.
SimReport run(const ProtocolConfig& cfg, Mode mode, const SimInputs& in = {},
              std::vector<std::uint8_t>* user_outcomes = nullptr);

// One independent run per load; sub-seeds derive from the load value so
// duplicate loads reproduce identical rows. Runs in parallel up to threads.
std::vector<SimReport> plr_curve(const ProtocolConfig& tmpl,
                                 std::span<const double> loads, Mode mode,
                                 const SimInputs& in = {},
                                 std::size_t threads = 1);

// log-domain interpolation of the load supported at a target PLR
std::optional<double> supported_load(std::span<const SimReport> curve,
                                     double target_plr);

} // namespace asyncra::sim
