#pragma once

#include "asyncra/pexit.hpp"
#include "asyncra/protograph.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace asyncra::opt {

// Differential evolution over integer base matrices under the mirror
// symmetry constraint. The search operates on the free half of the matrix;
// the dependent half is projected before every evaluation.
struct DeConfig {
    std::size_t population = 200;
    double crossover_prob = 0.6;
    double mutation_factor = 0.5;
    std::size_t generations = 4000;
    int max_entry = 3;
    std::size_t n_b = 11, m_b = 6, p_b = 1;
    std::vector<double> alphas = {0.6, 0.9};
    double sigma_n2 = 0.12559432157547897; // Es/N0 = 6 dB
    std::uint64_t seed = 1;
    pexit::PexitOptions analysis;

    void validate() const;
};

struct DeResult {
    proto::BaseMatrix best;
    double best_gain = 0.0;
    std::vector<double> history; // best-so-far gain per generation
};

DeResult evolve(const DeConfig& cfg);

// Column permutation search with degree grouping: unpunctured columns are
// grouped (by exact column weight unless explicit labels are given) and the
// distinct arrangements of group labels over positions are enumerated, one
// representative column order per group. Punctured columns stay in place.
struct PermSearchResult {
    proto::ColumnPermutation perm;
    double gain = 0.0;
    std::size_t arrangements = 0;
};

PermSearchResult grouped_permutation_search(
    const proto::BaseMatrix& b, std::span<const double> alphas,
    double sigma_n2, std::size_t enumeration_cap = 100000,
    std::optional<std::vector<int>> column_groups = std::nullopt,
    const pexit::PexitOptions& opts = {});

} // namespace asyncra::opt
