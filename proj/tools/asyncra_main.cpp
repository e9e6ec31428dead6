// asyncra: protograph LDPC design and asynchronous random-access evaluation.

#include "asyncra/analysis.hpp"
#include "asyncra/channel.hpp"
#include "asyncra/codec.hpp"
#include "asyncra/config.hpp"
#include "asyncra/kernels.hpp"
#include "asyncra/optimizer.hpp"
#include "asyncra/pexit.hpp"
#include "asyncra/protograph.hpp"
#include "asyncra/qde.hpp"
#include "asyncra/rasim.hpp"
#include "asyncra/rng.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace asyncra;

std::string fmt(double v) { return cfg::format_double(v); }

struct Common {
    std::string config_path;
    std::string out = "-";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t threads = 0;

    cfg::Config config;

    void finalize() {
        if (!config_path.empty())
            config = cfg::Config::from_file(config_path);
        seed = cfg::resolve_seed(
            seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
            config);
        if (threads == 0)
            threads = static_cast<std::size_t>(config.get_int(
                "global", "threads",
                std::max(1u, std::thread::hardware_concurrency())));
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_path,
                    "key=value config file with [section] headers");
    app->add_option("--out,-o", c.out, "output CSV path ('-' for stdout)");
    app->add_option("--seed", c.seed, "master seed (env ASYNC_RA_SEED as fallback)")
        ->each([&c](const std::string&) { c.seed_set = true; });
    app->add_option("--threads", c.threads, "worker thread cap");
}

int cmd_capacity(Common& c, const std::vector<double>& esn0_list) {
    cfg::CsvWriter csv(c.out, "esn0_db,sigma2,capacity_bits", c.config.hash(),
                       c.seed);
    for (double db : esn0_list) {
        const double s2 = analysis::esn0_db_to_sigma_n2(db);
        csv.row({fmt(db), fmt(s2), fmt(analysis::qpsk_capacity(s2))});
    }
    return 0;
}

int cmd_threshold(Common& c, const std::string& matrix_spec,
                  const std::vector<double>& alphas, const std::string& sides,
                  double esn0_db) {
    const auto b = proto::resolve_base_matrix(matrix_spec);
    const double sigma_n2 = analysis::esn0_db_to_sigma_n2(esn0_db);
    const bool both = sides == "both";
    std::vector<analysis::Side> side_list;
    if (both || sides == "begin") side_list.push_back(analysis::Side::Begin);
    if (both || sides == "end") side_list.push_back(analysis::Side::End);
    if (side_list.empty())
        throw CLI::ValidationError("--sides must be begin, end or both");

    cfg::CsvWriter csv(
        c.out, "alpha,side,model,threshold_variance,shannon_limit_variance",
        c.config.hash(), c.seed);
    for (double a : alphas) {
        const double limit =
            analysis::shannon_interference_limit(a, sigma_n2, 1.0);
        for (auto side : side_list) {
            const auto thr =
                pexit::pexit_interference_threshold(b, a, side, sigma_n2);
            csv.row({fmt(thr.alpha_effective), analysis::side_name(side),
                     "gaussian", fmt(thr.value), fmt(limit)});
        }
    }
    return 0;
}

int cmd_qde(Common& c, const std::string& matrix_spec,
            const std::vector<std::string>& models,
            const std::vector<double>& alphas) {
    const auto b = proto::resolve_base_matrix(matrix_spec);
    cfg::CsvWriter csv(
        c.out,
        "alpha,model,threshold_sigma_n2,threshold_esn0_db,effective_alpha,"
        "converged",
        c.config.hash(), c.seed);
    for (double a : alphas)
        for (const auto& m : models) {
            const auto model = qde::model_from_name(m);
            const auto thr = qde::qde_threshold(b, model, a);
            csv.row({fmt(a), m, fmt(thr.value),
                     thr.is_infinite() || thr.value <= 0.0
                         ? "nan"
                         : fmt(analysis::sigma_n2_to_esn0_db(thr.value)),
                     fmt(thr.alpha_effective), thr.converged ? "1" : "0"});
        }
    return 0;
}

int cmd_llr_pdf(Common& c, double esn0_db, std::size_t samples,
                std::size_t bins, double range) {
    const double sigma_n2 = analysis::esn0_db_to_sigma_n2(esn0_db);
    const double sigma = std::sqrt(sigma_n2);
    Rng rng(mix_seed(c.seed, 0x11d));
    const auto& pts = channel::QpskConstellation::points();

    cfg::CsvWriter csv(c.out, "llr_bin_center,density,model", c.config.hash(),
                       c.seed);
    const double bin_w = 2.0 * range / static_cast<double>(bins);
    std::vector<std::vector<double>> hist(3, std::vector<double>(bins, 0.0));

    for (std::size_t s = 0; s < samples; ++s) {
        // bit level 1 equal to 0: transmit S1 (S2 yields the same law)
        const auto tx = pts[0];
        const auto noise = channel::cplx(sigma * rng.normal(),
                                         sigma * rng.normal());
        const auto gauss_int =
            channel::cplx(std::sqrt(0.5) * rng.normal(),
                          std::sqrt(0.5) * rng.normal());
        const auto interferer_symbol = pts[rng.below(4)];
        const double phase = rng.uniform() * 2.0 * 3.14159265358979323846;

        const double l_gauss =
            channel::llr_gaussian(tx + gauss_int + noise, sigma_n2 + 0.5)
                .first;
        const double l_phase0 =
            channel::llr_single_interferer(tx + interferer_symbol + noise, 0.0,
                                           0.0, sigma_n2)
                .first;
        const double l_rand =
            channel::llr_single_interferer_random_phase_bessel(
                tx + interferer_symbol * std::polar(1.0, phase) + noise,
                sigma_n2)
                .first;
        const double ls[3] = {l_gauss, l_phase0, l_rand};
        for (int m = 0; m < 3; ++m) {
            const auto bin = static_cast<long>(
                std::floor((ls[m] + range) / bin_w));
            if (bin >= 0 && bin < static_cast<long>(bins))
                hist[m][static_cast<std::size_t>(bin)] += 1.0;
        }
    }
    const char* names[3] = {"gaussian", "qpsk_phase0", "qpsk_randphase"};
    for (int m = 0; m < 3; ++m)
        for (std::size_t k = 0; k < bins; ++k)
            csv.row({fmt(-range + (static_cast<double>(k) + 0.5) * bin_w),
                     fmt(hist[m][k] /
                         (static_cast<double>(samples) * bin_w)),
                     names[m]});
    return 0;
}

int cmd_optimize(Common& c, const std::string& shape,
                 const std::vector<double>& alphas, std::size_t population,
                 std::size_t generations, int max_entry, double esn0_db,
                 const std::string& matrix_out, const std::string& history_out,
                 bool perm_mode, const std::string& matrix_spec,
                 std::size_t cap, const std::string& groups_str) {
    const double sigma_n2 = analysis::esn0_db_to_sigma_n2(esn0_db);
    if (perm_mode) {
        const auto b = proto::resolve_base_matrix(matrix_spec);
        std::optional<std::vector<int>> groups;
        if (!groups_str.empty()) {
            std::vector<int> g;
            std::stringstream ss(groups_str);
            std::string item;
            while (std::getline(ss, item, ',')) g.push_back(std::stoi(item));
            groups = std::move(g);
        }
        const auto res = opt::grouped_permutation_search(b, alphas, sigma_n2,
                                                         cap, groups);
        cfg::CsvWriter csv(c.out, "position,source_column,gain,arrangements",
                           c.config.hash(), c.seed);
        for (std::size_t j = 0; j < res.perm.size(); ++j)
            csv.row({std::to_string(j), std::to_string(res.perm.perm[j]),
                     fmt(res.gain), std::to_string(res.arrangements)});
        return 0;
    }

    opt::DeConfig de;
    {
        std::size_t nb = 0, mb = 0, pb = 0;
        char x1 = 0, x2 = 0;
        std::stringstream ss(shape);
        ss >> nb >> x1 >> mb >> x2 >> pb;
        if (!ss || x1 != 'x' || x2 != 'x')
            throw CLI::ValidationError("--shape must look like 11x6x1");
        de.n_b = nb;
        de.m_b = mb;
        de.p_b = pb;
    }
    de.alphas = alphas;
    de.population = population;
    de.generations = generations;
    de.max_entry = max_entry;
    de.sigma_n2 = sigma_n2;
    de.seed = c.seed;
    const auto res = opt::evolve(de);

    if (!matrix_out.empty()) proto::save_base_matrix(matrix_out, res.best);
    cfg::CsvWriter csv(history_out.empty() ? c.out : history_out,
                       "generation,best_gain", c.config.hash(), c.seed);
    for (std::size_t g = 0; g < res.history.size(); ++g)
        csv.row({std::to_string(g), fmt(res.history[g])});
    std::cerr << "best gain " << fmt(res.best_gain) << "\n";
    return 0;
}

std::string code_label(sim::Mode mode, double beta,
                       const std::string& matrix_spec) {
    if (mode == sim::Mode::AbstractRandom)
        return "random_beta_" + fmt(beta);
    constexpr const char* prefix = "builtin:";
    if (matrix_spec.rfind(prefix, 0) == 0) return matrix_spec.substr(8);
    return matrix_spec;
}

int cmd_simulate(Common& c, const std::string& mode_str,
                 const std::vector<double>& loads, double horizon,
                 std::size_t target_users, const std::string& matrix_spec,
                 double beta, double esn0_db, double vf, double window,
                 double shift, std::size_t n_s, std::uint64_t lift_seed) {
    const auto mode = sim::mode_from_name(mode_str);
    sim::ProtocolConfig tmpl;
    tmpl.vf_tp = vf;
    tmpl.window_tp = window;
    tmpl.shift_tp = shift;
    tmpl.n_s = n_s;
    tmpl.es_n0_db = esn0_db;
    tmpl.beta = beta;
    tmpl.seed = c.seed;
    tmpl.horizon_tp = horizon;

    sim::SimInputs inputs;
    proto::BaseMatrix base = proto::builtin(proto::Builtin::AdHoc);
    std::optional<codec::CodeInstance> code;
    if (mode != sim::Mode::AbstractRandom) {
        base = proto::resolve_base_matrix(matrix_spec);
        inputs.base = &base;
        if (mode == sim::Mode::Phy) {
            const std::size_t tx_cols = base.cols() - base.n_punctured();
            if ((2 * n_s) % tx_cols != 0)
                throw CLI::ValidationError(
                    "2*n_s must be divisible by the unpunctured column count");
            code.emplace(codec::lift(base, 2 * n_s / tx_cols, lift_seed));
            inputs.code = &*code;
        }
    }

    cfg::CsvWriter csv(c.out, "G,mode,code,users,lost,plr,ci_low,ci_high",
                       c.config.hash(), c.seed);
    const std::string label = code_label(mode, beta, matrix_spec);
    for (double g : loads) {
        sim::ProtocolConfig cfgl = tmpl;
        if (target_users > 0)
            cfgl.horizon_tp = static_cast<double>(target_users) / g +
                              2.0 * tmpl.window_tp + 100.0;
        std::vector<double> one{g};
        const auto reports = sim::plr_curve(cfgl, one, mode, inputs, 1);
        const auto& r = reports.front();
        csv.row({fmt(g), sim::mode_name(mode), label,
                 std::to_string(r.finalized), std::to_string(r.lost),
                 fmt(r.plr), fmt(r.ci_low), fmt(r.ci_high)});
        std::cerr << "G=" << fmt(g) << " plr=" << fmt(r.plr) << " ("
                  << r.finalized << " users)\n";
    }
    return 0;
}

int cmd_repro(Common& c, const std::string& figure, bool full);

int dispatch(int argc, char** argv) {
    CLI::App app{
        "protograph LDPC code design and asynchronous random-access "
        "evaluation toolkit"};
    app.require_subcommand(1);
    Common c;

    // capacity
    auto* cap = app.add_subcommand("capacity", "QPSK capacity table");
    add_common(cap, c);
    std::string cap_esn0 = "0";
    cap->add_option("--esn0", cap_esn0, "Es/N0 values in dB (comma separated)");

    // threshold
    auto* thr = app.add_subcommand(
        "threshold", "PEXIT interference thresholds and Shannon limits");
    add_common(thr, c);
    std::string thr_matrix = "builtin:AdHoc";
    std::string thr_alphas = "0.6,0.9";
    std::string thr_sides = "both";
    double thr_esn0 = 6.0;
    thr->add_option("--matrix", thr_matrix, "builtin:<name> or file path");
    thr->add_option("--alphas", thr_alphas, "interference fractions");
    thr->add_option("--sides", thr_sides, "begin, end or both");
    thr->add_option("--esn0", thr_esn0, "Es/N0 in dB");

    // qde
    auto* qde_cmd = app.add_subcommand(
        "qde", "quantized density-evolution noise thresholds");
    add_common(qde_cmd, c);
    std::string qde_matrix = "builtin:AdHoc";
    std::string qde_models = "gaussian,qpsk_phase0,qpsk_randphase";
    std::string qde_alphas = "0.2,0.5,0.8";
    qde_cmd->add_option("--matrix", qde_matrix, "builtin:<name> or file path");
    qde_cmd->add_option("--models", qde_models, "interferer models");
    qde_cmd->add_option("--alphas", qde_alphas, "interference fractions");

    // llr-pdf
    auto* pdf = app.add_subcommand("llr-pdf",
                                   "Monte Carlo bit-LLR histograms");
    add_common(pdf, c);
    double pdf_esn0 = 6.0, pdf_range = 40.0;
    std::size_t pdf_samples = 200000, pdf_bins = 200;
    pdf->add_option("--esn0", pdf_esn0, "Es/N0 in dB");
    pdf->add_option("--samples", pdf_samples, "Monte Carlo draws");
    pdf->add_option("--bins", pdf_bins, "histogram bins");
    pdf->add_option("--range", pdf_range, "histogram half-range");

    // optimize
    auto* op = app.add_subcommand("optimize",
                                  "differential-evolution base-matrix search "
                                  "or grouped permutation search");
    add_common(op, c);
    std::string op_shape = "11x6x1", op_alphas = "0.6,0.9";
    std::size_t op_pop = 40, op_gens = 200, op_cap = 100000;
    int op_max_entry = 3;
    double op_esn0 = 6.0;
    std::string op_matrix_out, op_history_out;
    bool op_perm = false;
    std::string op_matrix = "builtin:FiveG", op_groups;
    op->add_option("--shape", op_shape, "n_b x m_b x p_b, e.g. 11x6x1");
    op->add_option("--alphas", op_alphas, "target interference fractions");
    op->add_option("--population", op_pop, "DE population size");
    op->add_option("--generations", op_gens, "DE generations");
    op->add_option("--max-entry", op_max_entry, "largest base matrix entry");
    op->add_option("--esn0", op_esn0, "Es/N0 in dB");
    op->add_option("--matrix-out", op_matrix_out, "write the best matrix here");
    op->add_option("--history-out", op_history_out, "gain history CSV");
    op->add_flag("--perm", op_perm, "grouped column-permutation search");
    op->add_option("--matrix", op_matrix, "matrix for --perm");
    op->add_option("--cap", op_cap, "enumeration cap for --perm");
    op->add_option("--groups", op_groups,
                   "explicit group label per unpunctured column for --perm");

    // simulate
    auto* si = app.add_subcommand("simulate",
                                  "asynchronous random-access Monte Carlo");
    add_common(si, c);
    std::string si_mode = "abstract-ldpc", si_matrix = "builtin:AdHoc";
    std::string si_loads = "0.5,0.7,0.9";
    double si_horizon = 5000, si_beta = 1.0, si_esn0 = 6.0;
    double si_vf = 200, si_window = 600, si_shift = 20;
    std::size_t si_ns = 480, si_target = 0;
    std::uint64_t si_lift_seed = 7;
    si->add_option("--mode", si_mode, "abstract-random, abstract-ldpc or phy");
    si->add_option("--loads", si_loads, "channel loads G");
    si->add_option("--horizon", si_horizon, "simulated span in t_p units");
    si->add_option("--target-users", si_target,
                   "size horizon for this many tallied users per load");
    si->add_option("--base-matrix", si_matrix, "builtin:<name> or file path");
    si->add_option("--beta", si_beta, "capacity fraction (abstract-random)");
    si->add_option("--es-n0-db", si_esn0, "Es/N0 in dB");
    si->add_option("--vf", si_vf, "virtual frame t_f in t_p");
    si->add_option("--window", si_window, "receiver window W in t_p");
    si->add_option("--shift", si_shift, "window shift in t_p");
    si->add_option("--ns", si_ns, "symbols per packet");
    si->add_option("--lift-seed", si_lift_seed, "lifting seed (phy mode)");

    // repro
    auto* rp = app.add_subcommand("repro",
                                  "desk-scale presets for the figure sweeps");
    add_common(rp, c);
    std::string rp_fig;
    bool rp_full = false;
    rp->add_option("figure", rp_fig, "fig4 | fig5 | fig6 | fig7 | fig8")
        ->required();
    rp->add_flag("--full", rp_full, "full-depth variant where applicable");

    CLI11_PARSE(app, argc, argv);
    c.finalize();

    if (cap->parsed())
        return cmd_capacity(c, cfg::parse_double_list(cap_esn0));
    if (thr->parsed())
        return cmd_threshold(c, thr_matrix, cfg::parse_double_list(thr_alphas),
                             thr_sides, thr_esn0);
    if (qde_cmd->parsed()) {
        std::vector<std::string> models;
        std::stringstream ss(qde_models);
        std::string item;
        while (std::getline(ss, item, ',')) models.push_back(item);
        return cmd_qde(c, qde_matrix, models,
                       cfg::parse_double_list(qde_alphas));
    }
    if (pdf->parsed())
        return cmd_llr_pdf(c, pdf_esn0, pdf_samples, pdf_bins, pdf_range);
    if (op->parsed())
        return cmd_optimize(c, op_shape, cfg::parse_double_list(op_alphas),
                            op_pop, op_gens, op_max_entry, op_esn0,
                            op_matrix_out, op_history_out, op_perm, op_matrix,
                            op_cap, op_groups);
    if (si->parsed())
        return cmd_simulate(c, si_mode, cfg::parse_double_list(si_loads),
                            si_horizon, si_target, si_matrix, si_beta, si_esn0,
                            si_vf, si_window, si_shift, si_ns, si_lift_seed);
    if (rp->parsed()) return cmd_repro(c, rp_fig, rp_full);
    return 1;
}

int cmd_repro(Common& c, const std::string& figure, bool full) {
    const auto out_or = [&](const char* def) {
        return c.out == "-" ? std::string(def) : c.out;
    };
    if (figure == "fig4") {
        Common cc = c;
        cc.out = out_or("fig4_llr_pdf.csv");
        return cmd_llr_pdf(cc, 6.0, 500000, 241, 40.0);
    }
    if (figure == "fig5") {
        const double sigma_n2 = analysis::esn0_db_to_sigma_n2(6.0);
        cfg::CsvWriter csv(
            out_or("fig5_thresholds.csv"),
            "code,alpha,side,threshold_variance,shannon_limit_variance",
            c.config.hash(), c.seed);
        const std::vector<double> alphas = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
        for (const char* name : {"AdHoc", "FiveG", "FiveGPermuted"}) {
            const auto b = proto::builtin(proto::builtin_from_name(name));
            for (double a : alphas) {
                const double limit =
                    analysis::shannon_interference_limit(a, sigma_n2, 1.0);
                for (auto side : {analysis::Side::Begin, analysis::Side::End}) {
                    const auto thr = pexit::pexit_interference_threshold(
                        b, a, side, sigma_n2);
                    csv.row({name, fmt(thr.alpha_effective),
                             analysis::side_name(side), fmt(thr.value),
                             fmt(limit)});
                }
            }
            std::cerr << name << " done\n";
        }
        return 0;
    }
    if (figure == "fig6") {
        Common cc = c;
        cc.out = out_or("fig6_qde.csv");
        return cmd_qde(cc, "builtin:AdHoc",
                       {"gaussian", "qpsk_phase0", "qpsk_randphase"},
                       {0.2, 0.5, 0.8});
    }
    if (figure == "fig7" || figure == "fig8") {
        const bool phy = figure == "fig8";
        const std::size_t users = phy ? (full ? 10000 : 1000)
                                      : (full ? 20000 : 20000);
        cfg::CsvWriter csv(
            out_or(phy ? "fig8_plr.csv" : "fig7_plr.csv"),
            "G,mode,code,users,lost,plr,ci_low,ci_high", c.config.hash(),
            c.seed);
        const std::vector<double> loads = {0.6, 0.7, 0.8, 0.9, 1.0, 1.1};
        struct Job {
            sim::Mode mode;
            const char* matrix;
            double beta;
        };
        std::vector<Job> jobs;
        const auto abstract_mode =
            phy ? sim::Mode::Phy : sim::Mode::AbstractLdpc;
        jobs.push_back({abstract_mode, "builtin:AdHoc", 1.0});
        jobs.push_back({abstract_mode, "builtin:FiveGPermuted", 1.0});
        jobs.push_back({abstract_mode, "builtin:FiveG", 1.0});
        if (!phy) {
            jobs.push_back({sim::Mode::AbstractRandom, "", 1.0});
            jobs.push_back({sim::Mode::AbstractRandom, "", 0.95});
        }
        for (const auto& job : jobs) {
            sim::ProtocolConfig tmpl;
            tmpl.seed = c.seed;
            tmpl.beta = job.beta;
            sim::SimInputs inputs;
            proto::BaseMatrix base = proto::builtin(proto::Builtin::AdHoc);
            std::optional<codec::CodeInstance> code;
            if (job.mode != sim::Mode::AbstractRandom) {
                base = proto::resolve_base_matrix(job.matrix);
                inputs.base = &base;
                if (job.mode == sim::Mode::Phy) {
                    code.emplace(codec::lift(
                        base, 960 / (base.cols() - base.n_punctured()), 7));
                    inputs.code = &*code;
                }
            }
            const std::string label = code_label(job.mode, job.beta,
                                                 job.matrix);
            for (double g : loads) {
                sim::ProtocolConfig cfgl = tmpl;
                cfgl.horizon_tp =
                    static_cast<double>(users) / g + 2.0 * tmpl.window_tp +
                    100.0;
                std::vector<double> one{g};
                const auto rep =
                    sim::plr_curve(cfgl, one, job.mode, inputs, 1).front();
                csv.row({fmt(g), sim::mode_name(job.mode), label,
                         std::to_string(rep.finalized),
                         std::to_string(rep.lost), fmt(rep.plr),
                         fmt(rep.ci_low), fmt(rep.ci_high)});
                std::cerr << label << " G=" << fmt(g) << " plr="
                          << fmt(rep.plr) << "\n";
            }
        }
        return 0;
    }
    std::cerr << "unknown figure preset: " << figure << "\n";
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
