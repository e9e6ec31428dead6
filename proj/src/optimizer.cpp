#include "asyncra/optimizer.hpp"

#include "asyncra/analysis.hpp"
#include "asyncra/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace asyncra::opt {

void DeConfig::validate() const {
    if (population < 4)
        throw std::invalid_argument("de: population must be >= 4");
    if (!(crossover_prob > 0.0 && crossover_prob < 1.0))
        throw std::invalid_argument("de: crossover_prob must be in (0,1)");
    if (max_entry < 1) throw std::invalid_argument("de: max_entry must be >= 1");
    if (m_b >= n_b || p_b >= n_b)
        throw std::invalid_argument("de: shape must satisfy m_b < n_b, p_b < n_b");
    if (alphas.empty()) throw std::invalid_argument("de: need target alphas");
}

namespace {

// free-cell layout under the mirror constraint; punctured columns are the
// leading p_b ones
struct SymmetryMap {
    std::size_t n_b, m_b, p_b;
    // each free cell: (row, col) plus its mirror
    struct Cell {
        std::size_t r, c, mr, mc;
    };
    std::vector<Cell> cells;

    SymmetryMap(std::size_t nb, std::size_t mb, std::size_t pb)
        : n_b(nb), m_b(mb), p_b(pb) {
        const auto add_block = [&](std::size_t col0, std::size_t width) {
            for (std::size_t i = 0; i < m_b; ++i)
                for (std::size_t j = 0; j < width; ++j) {
                    const std::size_t mi = m_b - 1 - i, mj = width - 1 - j;
                    if (std::make_pair(i, j) <= std::make_pair(mi, mj))
                        cells.push_back({i, col0 + j, mi, col0 + mj});
                }
        };
        add_block(0, p_b);      // punctured block
        add_block(p_b, n_b - p_b); // transmitted block
    }

    std::size_t genome_size() const { return cells.size(); }

    // round, clamp and mirror a genome into a full entry table
    std::vector<int> project(std::span<const double> genes,
                             int max_entry) const {
        std::vector<int> entries(m_b * n_b, 0);
        for (std::size_t g = 0; g < cells.size(); ++g) {
            int v = static_cast<int>(std::lround(genes[g]));
            v = std::clamp(v, 0, max_entry);
            const auto& c = cells[g];
            entries[c.r * n_b + c.c] = v;
            entries[c.mr * n_b + c.mc] = v;
        }
        return entries;
    }
};

class GainEvaluator {
public:
    GainEvaluator(std::vector<double> alphas, double sigma_n2,
                  pexit::PexitOptions opts)
        : alphas_(std::move(alphas)), sigma_n2_(sigma_n2), opts_(opts) {
        const double rate = 1.0; // rate-1/2 QPSK, bits per symbol
        for (double a : alphas_)
            limits_.push_back(
                analysis::shannon_interference_limit(a, sigma_n2_, rate));
        for (double l : limits_)
            if (!std::isfinite(l))
                throw std::invalid_argument(
                    "optimizer: Shannon limit infinite at a target alpha");
    }

    double operator()(const proto::BaseMatrix& b) {
        const auto it = cache_.find(b.entries());
        if (it != cache_.end()) return it->second;
        const bool symmetric = proto::is_edge_symmetric(b);
        double g = 1.0;
        for (std::size_t i = 0; i < alphas_.size(); ++i) {
            const auto beg = pexit::pexit_interference_threshold(
                b, alphas_[i], analysis::Side::Begin, sigma_n2_, opts_);
            const auto end =
                symmetric ? beg
                          : pexit::pexit_interference_threshold(
                                b, alphas_[i], analysis::Side::End, sigma_n2_,
                                opts_);
            if (beg.is_infinite() || end.is_infinite())
                throw std::invalid_argument(
                    "optimizer: infinite threshold at a target alpha; pick "
                    "larger alphas");
            g *= (beg.value / limits_[i]) * (end.value / limits_[i]);
        }
        cache_.emplace(b.entries(), g);
        return g;
    }

private:
    std::vector<double> alphas_;
    double sigma_n2_;
    pexit::PexitOptions opts_;
    std::vector<double> limits_;
    std::map<std::vector<int>, double> cache_;
};

} // namespace

DeResult evolve(const DeConfig& cfg) {
    cfg.validate();
    const SymmetryMap sym(cfg.n_b, cfg.m_b, cfg.p_b);
    const std::size_t dim = sym.genome_size();
    Rng rng(mix_seed(cfg.seed, 0xde));
    GainEvaluator gain_of(cfg.alphas, cfg.sigma_n2, cfg.analysis);

    std::vector<std::size_t> punct(cfg.p_b);
    for (std::size_t i = 0; i < cfg.p_b; ++i) punct[i] = i;

    const auto evaluate = [&](std::span<const double> genes) -> double {
        const auto entries = sym.project(genes, cfg.max_entry);
        try {
            const proto::BaseMatrix b(cfg.m_b, cfg.n_b, entries, punct);
            return gain_of(b);
        } catch (const std::invalid_argument&) {
            return 0.0; // empty row or column: infeasible candidate
        }
    };

    std::vector<std::vector<double>> pop(cfg.population,
                                         std::vector<double>(dim));
    std::vector<double> fitness(cfg.population);
    for (auto& genome : pop)
        for (auto& g : genome)
            g = rng.uniform() * (cfg.max_entry + 1.0) - 0.5;
    for (std::size_t i = 0; i < cfg.population; ++i)
        fitness[i] = evaluate(pop[i]);

    std::size_t best_i = static_cast<std::size_t>(
        std::max_element(fitness.begin(), fitness.end()) - fitness.begin());
    if (fitness[best_i] == 0.0)
        throw std::runtime_error(
            "de: no valid candidate in the initial population; loosen "
            "max_entry or shrink the shape");

    DeResult res{proto::BaseMatrix(cfg.m_b, cfg.n_b,
                                   sym.project(pop[best_i], cfg.max_entry),
                                   punct),
                 fitness[best_i],
                 {fitness[best_i]}};

    std::vector<double> trial(dim);
    for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
        // rand/1/bin: trials drawn for the whole generation, then selected
        std::vector<std::vector<double>> trials(cfg.population);
        for (std::size_t i = 0; i < cfg.population; ++i) {
            std::size_t r1, r2, r3;
            do r1 = rng.below(cfg.population); while (r1 == i);
            do r2 = rng.below(cfg.population); while (r2 == i || r2 == r1);
            do r3 = rng.below(cfg.population);
            while (r3 == i || r3 == r1 || r3 == r2);
            const std::size_t jrand = rng.below(dim);
            for (std::size_t j = 0; j < dim; ++j) {
                if (j == jrand || rng.uniform() < cfg.crossover_prob)
                    trial[j] = pop[r1][j] +
                               cfg.mutation_factor * (pop[r2][j] - pop[r3][j]);
                else
                    trial[j] = pop[i][j];
                trial[j] = std::clamp(trial[j], -0.49,
                                      cfg.max_entry + 0.49);
            }
            trials[i] = trial;
        }
        for (std::size_t i = 0; i < cfg.population; ++i) {
            const double f = evaluate(trials[i]);
            if (f >= fitness[i]) {
                pop[i] = std::move(trials[i]);
                fitness[i] = f;
            }
            if (f > res.best_gain) {
                res.best_gain = f;
                res.best = proto::BaseMatrix(
                    cfg.m_b, cfg.n_b, sym.project(pop[i], cfg.max_entry),
                    punct);
            }
        }
        res.history.push_back(res.best_gain);
    }
    return res;
}

PermSearchResult grouped_permutation_search(
    const proto::BaseMatrix& b, std::span<const double> alphas,
    double sigma_n2, std::size_t enumeration_cap,
    std::optional<std::vector<int>> column_groups,
    const pexit::PexitOptions& opts) {
    const auto unp = b.unpunctured_cols();
    const std::size_t n = unp.size();

    std::vector<int> labels;
    if (column_groups) {
        if (column_groups->size() != n)
            throw std::invalid_argument(
                "perm search: one group label per unpunctured column");
        labels = *column_groups;
    } else {
        // group by exact column weight
        std::vector<int> weights(n);
        for (std::size_t i = 0; i < n; ++i) weights[i] = b.col_weight(unp[i]);
        auto distinct = weights;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()),
                       distinct.end());
        labels.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            labels[i] = static_cast<int>(
                std::lower_bound(distinct.begin(), distinct.end(), weights[i]) -
                distinct.begin());
    }

    // multiset permutation count n! / prod(count_l!)
    std::map<int, std::size_t> group_count;
    for (int l : labels) ++group_count[l];
    double count = 1.0;
    {
        std::size_t pos = 0;
        for (const auto& [l, c] : group_count)
            for (std::size_t i = 1; i <= c; ++i)
                count *= static_cast<double>(++pos) / static_cast<double>(i);
    }
    if (count > static_cast<double>(enumeration_cap))
        throw std::invalid_argument(
            "perm search: " + std::to_string(count) +
            " arrangements exceed the cap of " +
            std::to_string(enumeration_cap) +
            "; pass coarser column groups");

    // columns of each group in original order
    std::map<int, std::vector<std::size_t>> group_cols;
    for (std::size_t i = 0; i < n; ++i) group_cols[labels[i]].push_back(unp[i]);

    GainEvaluator gain_of(std::vector<double>(alphas.begin(), alphas.end()),
                          sigma_n2, opts);

    std::vector<int> arrangement = labels;
    std::sort(arrangement.begin(), arrangement.end());

    PermSearchResult best;
    best.gain = -1.0;
    std::vector<std::size_t> perm(b.cols());
    do {
        ++best.arrangements;
        // positions of unpunctured columns receive the arranged groups
        std::map<int, std::size_t> next_in_group;
        for (std::size_t j = 0; j < b.cols(); ++j) perm[j] = j; // punctured pinned
        for (std::size_t i = 0; i < n; ++i) {
            const int l = arrangement[i];
            perm[unp[i]] = group_cols[l][next_in_group[l]++];
        }
        const proto::ColumnPermutation p(perm);
        const double g = gain_of(proto::permute_columns(b, p));
        if (g > best.gain ||
            (g == best.gain && best.gain >= 0.0 && perm < best.perm.perm)) {
            best.gain = g;
            best.perm = p;
        }
    } while (std::next_permutation(arrangement.begin(), arrangement.end()));
    return best;
}

} // namespace asyncra::opt
