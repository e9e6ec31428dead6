#include "asyncra/rasim.hpp"

#include "asyncra/analysis.hpp"
#include "asyncra/channel.hpp"
#include "asyncra/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace asyncra::sim {

namespace {
constexpr std::uint64_t kStreamArrivals = 1;
constexpr std::uint64_t kStreamNoise = 2;
constexpr std::uint64_t kStreamUserBase = 1000;
constexpr double kTwoPi = 6.28318530717958647692;
} // namespace

Mode mode_from_name(const std::string& name) {
    if (name == "abstract-random") return Mode::AbstractRandom;
    if (name == "abstract-ldpc") return Mode::AbstractLdpc;
    if (name == "phy") return Mode::Phy;
    throw std::invalid_argument("unknown simulation mode: " + name);
}

const char* mode_name(Mode m) {
    switch (m) {
    case Mode::AbstractRandom: return "abstract-random";
    case Mode::AbstractLdpc: return "abstract-ldpc";
    case Mode::Phy: return "phy";
    }
    throw std::logic_error("bad mode enum");
}

void ProtocolConfig::validate() const {
    if (!(load > 0.0)) throw std::invalid_argument("sim: load must be positive");
    if (replicas != 2)
        throw std::invalid_argument("sim: protocol is defined for d = 2");
    if (!(vf_tp > 2.0))
        throw std::invalid_argument("sim: virtual frame must exceed 2 t_p");
    if (window_tp < vf_tp)
        throw std::invalid_argument("sim: window smaller than the virtual frame");
    if (!(shift_tp > 0.0) || shift_tp > window_tp / 2.0)
        throw std::invalid_argument("sim: shift must satisfy 0 < shift << W");
    if (n_s == 0 || n_s % 2 != 0)
        throw std::invalid_argument("sim: n_s must be positive and even");
    if (horizon_tp <= window_tp)
        throw std::invalid_argument("sim: horizon must exceed the window");
}

double ProtocolConfig::sigma_n2() const {
    return analysis::esn0_db_to_sigma_n2(es_n0_db);
}

std::vector<double> gen_arrivals(const ProtocolConfig& cfg, Rng& rng) {
    std::vector<double> times;
    double t = rng.exponential(1.0 / cfg.load);
    while (t < cfg.horizon_tp) {
        times.push_back(t);
        t += rng.exponential(1.0 / cfg.load);
    }
    return times;
}

std::pair<std::int64_t, std::int64_t>
place_replicas(std::int64_t t0_sym, const ProtocolConfig& cfg, Rng& rng) {
    const auto tp = cfg.tp_symbols();
    const auto tf = static_cast<std::int64_t>(
        std::llround(cfg.vf_tp * static_cast<double>(tp)));
    const std::int64_t lo = tp + 1, hi = tf - tp; // gap in (t_p, t_f - t_p]
    const auto gap =
        lo + static_cast<std::int64_t>(
                 rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    return {t0_sym, t0_sym + gap};
}

namespace {

struct Rep {
    std::uint32_t user = 0;
    std::uint8_t idx = 0;
    std::int64_t start = 0;
    bool decoded = false;
    bool cancelled = false;
    bool dirty = true;
};

struct User {
    std::int64_t start[2] = {0, 0};
    double phase[2] = {0.0, 0.0};
    std::vector<std::uint64_t> cw; // packed codeword, phy mode
    bool decoded = false;
    bool core = false;
};

struct VecHash {
    std::size_t operator()(const std::vector<std::int32_t>& v) const {
        std::size_t h = 1469598103934665603ull;
        for (auto x : v) {
            h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(x));
            h *= 1099511628211ull;
        }
        return h;
    }
};

class Engine {
public:
    Engine(const ProtocolConfig& cfg, Mode mode, const SimInputs& in)
        : cfg_(cfg), mode_(mode), in_(in), sigma_n2_(cfg.sigma_n2()),
          noise_rng_(mix_seed(cfg.seed, kStreamNoise)) {
        tp_ = cfg.tp_symbols();
        ns_ = static_cast<std::int64_t>(cfg.n_s);
        tf_ = static_cast<std::int64_t>(
            std::llround(cfg.vf_tp * static_cast<double>(tp_)));
        win_ = static_cast<std::int64_t>(
            std::llround(cfg.window_tp * static_cast<double>(tp_)));
        shift_ = static_cast<std::int64_t>(
            std::llround(cfg.shift_tp * static_cast<double>(tp_)));
        horizon_ = static_cast<std::int64_t>(
            std::llround(cfg.horizon_tp * static_cast<double>(tp_)));

        if (mode_ == Mode::AbstractLdpc && in_.base == nullptr)
            throw std::invalid_argument("sim: abstract-ldpc needs a base matrix");
        if (mode_ == Mode::Phy) {
            if (in_.code == nullptr)
                throw std::invalid_argument("sim: phy mode needs a CodeInstance");
            if (in_.code->n_tx() != 2 * cfg_.n_s)
                throw std::invalid_argument(
                    "sim: code transmit length must equal 2 n_s");
        }
    }

    SimReport run(std::vector<std::uint8_t>* outcomes);

private:
    void generate_traffic();
    void extend_buffer(std::int64_t new_end);
    void advance_buffer_start(std::int64_t new_start);
    void add_waveform(const Rep& r, std::int64_t lo, std::int64_t hi,
                      double sign);
    // uncancelled replicas overlapping [lo, hi), excluding rep self
    template <typename F>
    void for_overlaps(std::int64_t lo, std::int64_t hi, F&& f) const;
    std::vector<std::uint32_t> interferer_counts(const Rep& r) const;
    bool attempt(const Rep& r);
    void cancel_pair(const Rep& r);
    std::vector<channel::cplx> replica_symbols(const Rep& r) const;
    std::size_t active_in(std::int64_t lo, std::int64_t hi) const;

    const ProtocolConfig& cfg_;
    Mode mode_;
    const SimInputs& in_;
    double sigma_n2_;
    std::int64_t tp_ = 0, ns_ = 0, tf_ = 0, win_ = 0, shift_ = 0, horizon_ = 0;

    std::vector<User> users_;
    std::vector<Rep> reps_; // sorted by start
    std::vector<std::int64_t> rep_starts_;
    std::vector<std::uint32_t> user_rep_[2]; // user -> index into reps_

    // rolling sample buffer [buf_start_, buf_end_), phy mode
    std::vector<channel::cplx> buf_;
    std::int64_t buf_start_ = 0, buf_end_ = 0;
    Rng noise_rng_;

    std::unordered_map<std::vector<std::int32_t>, bool, VecHash> ldpc_memo_;
    SimReport report_;
};

void Engine::generate_traffic() {
    Rng arrival_rng(mix_seed(cfg_.seed, kStreamArrivals));
    const auto arrivals = gen_arrivals(cfg_, arrival_rng);
    users_.resize(arrivals.size());
    reps_.reserve(2 * arrivals.size());

    for (std::size_t u = 0; u < arrivals.size(); ++u) {
        Rng urng(mix_seed(cfg_.seed, kStreamUserBase + u));
        const auto t0 = static_cast<std::int64_t>(
            std::floor(arrivals[u] * static_cast<double>(tp_)));
        const auto [s1, s2] = place_replicas(t0, cfg_, urng);
        auto& usr = users_[u];
        usr.start[0] = s1;
        usr.start[1] = s2;
        usr.phase[0] = urng.uniform() * kTwoPi;
        usr.phase[1] = urng.uniform() * kTwoPi;
        usr.core = arrivals[u] >= cfg_.window_tp &&
                   arrivals[u] < cfg_.horizon_tp - cfg_.window_tp;
        if (mode_ == Mode::Phy) {
            std::vector<std::uint8_t> info(in_.code->k());
            for (auto& b : info)
                b = static_cast<std::uint8_t>(urng.bits() & 1);
            const auto cw = in_.code->encode(info);
            usr.cw.assign((cw.size() + 63) / 64, 0);
            for (std::size_t v = 0; v < cw.size(); ++v)
                if (cw[v]) usr.cw[v / 64] ^= 1ull << (v % 64);
        }
        for (std::uint8_t i = 0; i < 2; ++i) {
            Rep r;
            r.user = static_cast<std::uint32_t>(u);
            r.idx = i;
            r.start = usr.start[i];
            reps_.push_back(r);
        }
    }
    std::sort(reps_.begin(), reps_.end(), [](const Rep& a, const Rep& b) {
        if (a.start != b.start) return a.start < b.start;
        if (a.user != b.user) return a.user < b.user;
        return a.idx < b.idx;
    });
    rep_starts_.resize(reps_.size());
    user_rep_[0].resize(users_.size());
    user_rep_[1].resize(users_.size());
    for (std::size_t i = 0; i < reps_.size(); ++i) {
        rep_starts_[i] = reps_[i].start;
        user_rep_[reps_[i].idx][reps_[i].user] = static_cast<std::uint32_t>(i);
    }
}

std::vector<channel::cplx> Engine::replica_symbols(const Rep& r) const {
    const auto& usr = users_[r.user];
    std::vector<std::uint8_t> bits(in_.code->n_tx());
    for (std::size_t t = 0; t < bits.size(); ++t) {
        const std::size_t v = in_.code->tx_to_var(t);
        bits[t] =
            static_cast<std::uint8_t>((usr.cw[v / 64] >> (v % 64)) & 1);
    }
    return channel::qpsk_modulate(bits);
}

void Engine::add_waveform(const Rep& r, std::int64_t lo, std::int64_t hi,
                          double sign) {
    lo = std::max(lo, r.start);
    hi = std::min(hi, r.start + ns_);
    if (lo >= hi) return;
    const auto symbols = replica_symbols(r);
    const double phi = users_[r.user].phase[r.idx];
    const auto& k = kernels::active();
    const auto off_buf = static_cast<std::size_t>(lo - buf_start_);
    const auto off_sym = static_cast<std::size_t>(lo - r.start);
    k.rotate_acc(reinterpret_cast<double*>(buf_.data() + off_buf),
                 reinterpret_cast<const double*>(symbols.data() + off_sym),
                 sign * std::cos(phi), sign * std::sin(phi),
                 static_cast<std::size_t>(hi - lo));
}

void Engine::extend_buffer(std::int64_t new_end) {
    if (new_end <= buf_end_) return;
    const auto old_end = buf_end_;
    buf_.resize(static_cast<std::size_t>(new_end - buf_start_));
    const double sigma = std::sqrt(sigma_n2_);
    for (std::int64_t s = old_end; s < new_end; ++s)
        buf_[static_cast<std::size_t>(s - buf_start_)] =
            channel::cplx(sigma * noise_rng_.normal(),
                          sigma * noise_rng_.normal());
    buf_end_ = new_end;
    // contributions of uncancelled replicas intersecting the new region
    const auto lo_it = std::lower_bound(rep_starts_.begin(), rep_starts_.end(),
                                        old_end - ns_ + 1);
    for (auto i = static_cast<std::size_t>(lo_it - rep_starts_.begin());
         i < reps_.size() && rep_starts_[i] < new_end; ++i) {
        const Rep& r = reps_[i];
        if (!r.cancelled) add_waveform(r, old_end, new_end, 1.0);
    }
}

void Engine::advance_buffer_start(std::int64_t new_start) {
    if (new_start <= buf_start_) return;
    if (new_start >= buf_end_) {
        // skipped ahead: consume noise stream to stay deterministic
        for (std::int64_t s = buf_end_; s < new_start; ++s) {
            noise_rng_.normal();
            noise_rng_.normal();
        }
        buf_.clear();
        buf_start_ = buf_end_ = new_start;
        return;
    }
    buf_.erase(buf_.begin(),
               buf_.begin() + static_cast<std::ptrdiff_t>(new_start - buf_start_));
    buf_start_ = new_start;
}

template <typename F>
void Engine::for_overlaps(std::int64_t lo, std::int64_t hi, F&& f) const {
    const auto it = std::lower_bound(rep_starts_.begin(), rep_starts_.end(),
                                     lo - ns_ + 1);
    for (auto i = static_cast<std::size_t>(it - rep_starts_.begin());
         i < reps_.size() && rep_starts_[i] < hi; ++i)
        f(i);
}

std::vector<std::uint32_t> Engine::interferer_counts(const Rep& r) const {
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(ns_), 0);
    for_overlaps(r.start, r.start + ns_, [&](std::size_t i) {
        const Rep& o = reps_[i];
        if (o.cancelled) return;
        if (o.user == r.user && o.idx == r.idx) return;
        const auto lo = std::max(o.start, r.start);
        const auto hi = std::min(o.start + ns_, r.start + ns_);
        for (std::int64_t s = lo; s < hi; ++s)
            ++counts[static_cast<std::size_t>(s - r.start)];
    });
    return counts;
}

std::size_t Engine::active_in(std::int64_t lo, std::int64_t hi) const {
    std::size_t n = 0;
    for_overlaps(lo, hi, [&](std::size_t i) {
        if (!reps_[i].cancelled) ++n;
    });
    return n;
}

bool Engine::attempt(const Rep& r) {
    ++report_.decode_attempts;
    const auto counts = interferer_counts(r);

    if (mode_ == Mode::AbstractRandom) {
        const auto pattern =
            analysis::InterferencePattern::from_counts(counts, sigma_n2_);
        return analysis::region_random(pattern, 1.0, cfg_.beta);
    }

    if (mode_ == Mode::AbstractLdpc) {
        const auto& b = *in_.base;
        const auto unp = b.unpunctured_cols();
        // per-type sum of interferer counts (z/2 symbols per type) is an
        // exact integer signature for memoization
        const std::size_t sym_per_type = counts.size() / unp.size();
        std::vector<std::int32_t> sig(unp.size(), 0);
        for (std::size_t t = 0; t < unp.size(); ++t)
            for (std::size_t s = 0; s < sym_per_type; ++s)
                sig[t] += static_cast<std::int32_t>(
                    counts[t * sym_per_type + s]);
        const auto it = ldpc_memo_.find(sig);
        if (it != ldpc_memo_.end()) return it->second;

        analysis::ProtoNoiseVector pn;
        pn.sigma2.assign(b.cols(), sigma_n2_);
        for (std::size_t t = 0; t < unp.size(); ++t)
            pn.sigma2[unp[t]] =
                sigma_n2_ + 0.5 * static_cast<double>(sig[t]) /
                                static_cast<double>(sym_per_type);
        const bool ok = pexit::region_ldpc(b, pn, in_.pexit_opts);
        if (ldpc_memo_.size() < 4000000) ldpc_memo_.emplace(std::move(sig), ok);
        return ok;
    }

    // full PHY: demap the residual waveform with per-symbol interference
    // power knowledge, then belief propagation plus a genie check
    const auto& code = *in_.code;
    const auto& usr = users_[r.user];
    const double phi = usr.phase[r.idx];
    const channel::cplx derot = std::polar(1.0, -phi);
    std::vector<double> llr(code.n_total(), 0.0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(ns_); ++i) {
        const auto y =
            buf_[static_cast<std::size_t>(r.start - buf_start_) + i] * derot;
        const double s2 = sigma_n2_ + 0.5 * static_cast<double>(counts[i]);
        const auto [l1, l2] = channel::llr_gaussian(y, s2);
        llr[code.tx_to_var(2 * i)] = l1;
        llr[code.tx_to_var(2 * i + 1)] = l2;
    }
    const auto res = code.bp_decode(llr, cfg_.bp_max_iter);
    if (!res.success) return false;
    for (std::size_t v = 0; v < code.n_total(); ++v) {
        const auto tx = static_cast<std::uint8_t>((usr.cw[v / 64] >> (v % 64)) & 1);
        if (res.bits[v] != tx) return false; // undetected error, genie rejects
    }
    return true;
}

void Engine::cancel_pair(const Rep& r) {
    users_[r.user].decoded = true;
    for (int idx = 0; idx < 2; ++idx) {
        Rep& cand = reps_[user_rep_[idx][r.user]];
        if (cand.cancelled) continue;
        cand.cancelled = true;
        if (mode_ == Mode::Phy)
            add_waveform(cand, buf_start_, buf_end_, -1.0);
        // wake overlapping pending replicas
        for_overlaps(cand.start, cand.start + ns_, [&](std::size_t j) {
            Rep& o = reps_[j];
            if (!o.cancelled && !o.decoded) o.dirty = true;
        });
    }
}

SimReport Engine::run(std::vector<std::uint8_t>* outcomes) {
    generate_traffic();
    report_.load = cfg_.load;
    report_.sic_pass_hist.assign(33, 0);

    // window processing order: eligible replicas sorted by total
    // interference overlap, ascending
    struct Cand {
        std::size_t rep;
        std::size_t energy;
    };
    std::vector<Cand> cands;

    // users ordered by second-replica end for finalization
    std::vector<std::uint32_t> by_end(users_.size());
    for (std::uint32_t u = 0; u < users_.size(); ++u) by_end[u] = u;
    std::sort(by_end.begin(), by_end.end(),
              [&](std::uint32_t a, std::uint32_t b) {
                  return users_[a].start[1] < users_[b].start[1];
              });
    std::size_t next_final = 0;
    if (outcomes) outcomes->clear();

    const std::int64_t last_w0 = horizon_ + tf_ + shift_;
    for (std::int64_t w0 = 0; w0 <= last_w0; w0 += shift_) {
        // finalize users whose virtual frame has slid past
        while (next_final < by_end.size()) {
            const auto u = by_end[next_final];
            if (users_[u].start[1] + ns_ > w0) break;
            if (users_[u].core) {
                ++report_.finalized;
                if (users_[u].decoded)
                    ++report_.decoded_users;
                else
                    ++report_.lost;
                // finalization order is deterministic given the seed, so
                // outcome vectors of same-seed runs align user by user
                if (outcomes) outcomes->push_back(users_[u].decoded ? 1 : 0);
            }
            ++next_final;
        }

        const std::int64_t w1 = w0 + win_;
        if (mode_ == Mode::Phy) {
            advance_buffer_start(w0);
            extend_buffer(w1);
        }

        std::size_t passes = 0;
        std::size_t prev_active = active_in(w0, w1);
        bool any = true;
        while (any &&
               (cfg_.max_sic_iters == 0 || passes < cfg_.max_sic_iters)) {
            any = false;
            cands.clear();
            const auto lo_it = std::lower_bound(rep_starts_.begin(),
                                                rep_starts_.end(), w0);
            for (auto i = static_cast<std::size_t>(lo_it - rep_starts_.begin());
                 i < reps_.size() && rep_starts_[i] + ns_ <= w1; ++i) {
                const Rep& r = reps_[i];
                if (r.cancelled || r.decoded || !r.dirty) continue;
                std::size_t energy = 0;
                for_overlaps(r.start, r.start + ns_, [&](std::size_t j) {
                    const Rep& o = reps_[j];
                    if (o.cancelled || (o.user == r.user && o.idx == r.idx))
                        return;
                    energy += static_cast<std::size_t>(
                        std::min(o.start + ns_, r.start + ns_) -
                        std::max(o.start, r.start));
                });
                cands.push_back({i, energy});
            }
            std::sort(cands.begin(), cands.end(),
                      [&](const Cand& a, const Cand& b) {
                          if (a.energy != b.energy) return a.energy < b.energy;
                          return a.rep < b.rep;
                      });
            if (!cands.empty()) ++passes;
            for (const auto& c : cands) {
                Rep& r = reps_[c.rep];
                if (r.cancelled || r.decoded) continue; // twin resolved earlier
                if (attempt(r)) {
                    ++report_.decode_successes;
                    r.decoded = true;
                    cancel_pair(r);
                    any = true;
                } else {
                    r.dirty = false;
                }
            }
            const std::size_t now_active = active_in(w0, w1);
            if (now_active > prev_active) report_.sic_monotone_ok = false;
            prev_active = now_active;
        }
        if (passes >= report_.sic_pass_hist.size())
            passes = report_.sic_pass_hist.size() - 1;
        ++report_.sic_pass_hist[passes];
    }

    // Wilson 95% interval on the loss ratio
    const double n = static_cast<double>(report_.finalized);
    if (n > 0.0) {
        const double p = static_cast<double>(report_.lost) / n;
        const double z = 1.959963984540054;
        const double z2 = z * z;
        const double denom = 1.0 + z2 / n;
        const double center = (p + z2 / (2.0 * n)) / denom;
        const double half =
            z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
        report_.plr = p;
        report_.ci_low = std::max(0.0, center - half);
        report_.ci_high = std::min(1.0, center + half);
    }

    return report_;
}

} // namespace

SimReport run(const ProtocolConfig& cfg, Mode mode, const SimInputs& in,
              std::vector<std::uint8_t>* user_outcomes) {
    cfg.validate();
    Engine engine(cfg, mode, in);
    return engine.run(user_outcomes);
}

std::vector<SimReport> plr_curve(const ProtocolConfig& tmpl,
                                 std::span<const double> loads, Mode mode,
                                 const SimInputs& in, std::size_t threads) {
    if (loads.empty()) throw std::invalid_argument("plr_curve: no loads given");
    std::vector<SimReport> out(loads.size());
    if (threads == 0) threads = 1;

    std::vector<std::exception_ptr> errors(loads.size());
    std::size_t next = 0;
    while (next < loads.size()) {
        const std::size_t batch = std::min(threads, loads.size() - next);
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < batch; ++t) {
            const std::size_t idx = next + t;
            pool.emplace_back([&, idx]() {
                try {
                    ProtocolConfig cfg = tmpl;
                    cfg.load = loads[idx];
                    // sub-seed from the load value: duplicate loads give
                    // identical rows
                    std::uint64_t bits;
                    static_assert(sizeof(bits) == sizeof(double));
                    std::memcpy(&bits, &loads[idx], sizeof(bits));
                    cfg.seed = mix_seed(tmpl.seed, bits);
                    out[idx] = run(cfg, mode, in);
                } catch (...) {
                    errors[idx] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        next += batch;
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::optional<double> supported_load(std::span<const SimReport> curve,
                                     double target_plr) {
    // walk the curve sorted by load; interpolate the last upward crossing
    std::vector<const SimReport*> pts;
    for (const auto& r : curve) pts.push_back(&r);
    std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) {
        return a->load < b->load;
    });
    std::optional<double> result;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double p0 = pts[i - 1]->plr, p1 = pts[i]->plr;
        if (p0 <= target_plr && p1 > target_plr) {
            if (p0 <= 0.0) {
                result = pts[i - 1]->load;
                continue;
            }
            const double f = (std::log(target_plr) - std::log(p0)) /
                             (std::log(p1) - std::log(p0));
            result = pts[i - 1]->load + f * (pts[i]->load - pts[i - 1]->load);
        }
    }
    return result;
}

} // namespace asyncra::sim
