#include "asyncra/protograph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace asyncra::proto {

Rational::Rational(long n, long d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

BaseMatrix::BaseMatrix(std::size_t rows, std::size_t cols,
                       std::vector<int> entries,
                       std::vector<std::size_t> punctured)
    : rows_(rows), cols_(cols), entries_(std::move(entries)),
      punctured_(std::move(punctured)) {
    if (rows_ == 0 || cols_ == 0)
        throw std::invalid_argument("base matrix must be non-empty");
    if (entries_.size() != rows_ * cols_)
        throw std::invalid_argument("base matrix entry count mismatch");
    if (rows_ >= cols_)
        throw std::invalid_argument("base matrix needs m_b < n_b");
    if (punctured_.size() >= cols_)
        throw std::invalid_argument("base matrix needs p_b < n_b");
    std::set<std::size_t> seen;
    for (std::size_t j : punctured_) {
        if (j >= cols_)
            throw std::invalid_argument("punctured column index out of range");
        if (!seen.insert(j).second)
            throw std::invalid_argument("duplicate punctured column");
    }
    for (int e : entries_)
        if (e < 0) throw std::invalid_argument("negative base matrix entry");
    for (std::size_t i = 0; i < rows_; ++i)
        if (row_weight(i) == 0)
            throw std::invalid_argument("base matrix has an empty row");
    for (std::size_t j = 0; j < cols_; ++j)
        if (col_weight(j) == 0)
            throw std::invalid_argument("base matrix has an empty column");
}

bool BaseMatrix::is_punctured(std::size_t j) const {
    return std::find(punctured_.begin(), punctured_.end(), j) != punctured_.end();
}

int BaseMatrix::col_weight(std::size_t j) const {
    int w = 0;
    for (std::size_t i = 0; i < rows_; ++i) w += at(i, j);
    return w;
}

int BaseMatrix::row_weight(std::size_t i) const {
    int w = 0;
    for (std::size_t j = 0; j < cols_; ++j) w += at(i, j);
    return w;
}

int BaseMatrix::max_entry() const {
    return *std::max_element(entries_.begin(), entries_.end());
}

std::vector<std::size_t> BaseMatrix::unpunctured_cols() const {
    std::vector<std::size_t> out;
    out.reserve(cols_ - punctured_.size());
    for (std::size_t j = 0; j < cols_; ++j)
        if (!is_punctured(j)) out.push_back(j);
    return out;
}

ColumnPermutation::ColumnPermutation(std::vector<std::size_t> p)
    : perm(std::move(p)) {
    std::vector<bool> hit(perm.size(), false);
    for (std::size_t v : perm) {
        if (v >= perm.size() || hit[v])
            throw std::invalid_argument("permutation is not a bijection");
        hit[v] = true;
    }
}

ColumnPermutation ColumnPermutation::inverse() const {
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t j = 0; j < perm.size(); ++j) inv[perm[j]] = j;
    return ColumnPermutation(std::move(inv));
}

Builtin builtin_from_name(const std::string& name) {
    if (name == "AdHoc") return Builtin::AdHoc;
    if (name == "FiveG") return Builtin::FiveG;
    if (name == "FiveGPermuted") return Builtin::FiveGPermuted;
    throw std::invalid_argument("unknown builtin base matrix: " + name);
}

const char* builtin_name(Builtin b) {
    switch (b) {
    case Builtin::AdHoc: return "AdHoc";
    case Builtin::FiveG: return "FiveG";
    case Builtin::FiveGPermuted: return "FiveGPermuted";
    }
    throw std::logic_error("bad builtin enum");
}

namespace {

// 6x11 design found by constrained differential evolution; first column
// punctured.
const int kAdHoc[6 * 11] = {
    1, 0, 0, 2, 2, 0, 0, 0, 0, 1, 1, //
    2, 0, 0, 0, 0, 0, 1, 0, 1, 1, 0, //
    2, 0, 1, 0, 1, 0, 0, 0, 0, 0, 1, //
    2, 1, 0, 0, 0, 0, 0, 1, 0, 1, 0, //
    2, 0, 1, 1, 0, 1, 0, 0, 0, 0, 0, //
    1, 1, 1, 0, 0, 0, 0, 2, 2, 0, 0, //
};

// 12x22 raptor-like short-block design; first two columns punctured.
const int kFiveG[12 * 22] = {
    1, 0, 0, 0, 1, 1, 1, 0, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, //
    0, 1, 0, 1, 1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, //
    1, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, //
    0, 1, 0, 1, 0, 1, 0, 1, 0, 0, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, //
    1, 1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, //
    1, 1, 1, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, //
    1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, //
    1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, //
    0, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, //
    1, 0, 1, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, //
    1, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, //
    1, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1, //
};

const std::size_t kFiveGPerm[22] = {0, 1,  16, 4,  6,  8,  10, 12, 20, 2,  14,
                                    18, 19, 15, 3,  21, 13, 11, 9,  7,  5,  17};

} // namespace

ColumnPermutation fiveg_permutation() {
    return ColumnPermutation(
        std::vector<std::size_t>(kFiveGPerm, kFiveGPerm + 22));
}

BaseMatrix builtin(Builtin which) {
    switch (which) {
    case Builtin::AdHoc:
        return BaseMatrix(6, 11, std::vector<int>(kAdHoc, kAdHoc + 66), {0});
    case Builtin::FiveG:
        return BaseMatrix(12, 22, std::vector<int>(kFiveG, kFiveG + 264),
                          {0, 1});
    case Builtin::FiveGPermuted:
        return permute_columns(builtin(Builtin::FiveG), fiveg_permutation());
    }
    throw std::logic_error("bad builtin enum");
}

Rational design_rate(const BaseMatrix& b) {
    return Rational(static_cast<long>(b.cols()) - static_cast<long>(b.rows()),
                    static_cast<long>(b.cols()) -
                        static_cast<long>(b.n_punctured()));
}

bool is_edge_symmetric(const BaseMatrix& b) {
    // Mirror condition on the transmitted submatrix and on the punctured
    // submatrix: column j from the left equals column j from the right with
    // its rows reversed.
    const auto check = [&](const std::vector<std::size_t>& cols) {
        const std::size_t nc = cols.size();
        for (std::size_t j = 0; j < nc; ++j)
            for (std::size_t i = 0; i < b.rows(); ++i)
                if (b.at(i, cols[j]) !=
                    b.at(b.rows() - 1 - i, cols[nc - 1 - j]))
                    return false;
        return true;
    };
    return check(b.unpunctured_cols()) && check(b.punctured_cols());
}

BaseMatrix permute_columns(const BaseMatrix& b, const ColumnPermutation& p) {
    if (p.size() != b.cols())
        throw std::invalid_argument("permutation length mismatch");
    std::vector<int> out(b.rows() * b.cols());
    for (std::size_t j = 0; j < b.cols(); ++j)
        for (std::size_t i = 0; i < b.rows(); ++i)
            out[i * b.cols() + j] = b.at(i, p.perm[j]);
    // relocate puncture set: output column j is punctured iff source p[j] was
    std::vector<std::size_t> punct;
    for (std::size_t j = 0; j < b.cols(); ++j)
        if (b.is_punctured(p.perm[j])) punct.push_back(j);
    return BaseMatrix(b.rows(), b.cols(), std::move(out), std::move(punct));
}

namespace {

// strips comments, returns whitespace-separated tokens
std::vector<std::string> tokenize(std::istream& in) {
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
    }
    return tokens;
}

} // namespace

BaseMatrix read_base_matrix(std::istream& in) {
    // The leading blank/comment-only line for p_b = 0 disappears under
    // tokenization, so the grammar is parsed purely positionally.
    const auto tokens = tokenize(in);
    std::size_t pos = 0;
    const auto next_int = [&]() -> long {
        if (pos >= tokens.size())
            throw std::runtime_error("base matrix file truncated");
        return std::stol(tokens[pos++]);
    };
    const long m = next_int(), n = next_int(), p = next_int();
    if (m <= 0 || n <= 0 || p < 0)
        throw std::runtime_error("bad base matrix header");
    std::vector<std::size_t> punct;
    for (long i = 0; i < p; ++i)
        punct.push_back(static_cast<std::size_t>(next_int()));
    std::vector<int> entries;
    entries.reserve(static_cast<std::size_t>(m * n));
    for (long i = 0; i < m * n; ++i)
        entries.push_back(static_cast<int>(next_int()));
    if (pos != tokens.size())
        throw std::runtime_error("trailing tokens in base matrix file");
    return BaseMatrix(static_cast<std::size_t>(m), static_cast<std::size_t>(n),
                      std::move(entries), std::move(punct));
}

BaseMatrix load_base_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open base matrix file: " + path);
    return read_base_matrix(in);
}

void write_base_matrix(std::ostream& out, const BaseMatrix& b) {
    out << b.rows() << ' ' << b.cols() << ' ' << b.n_punctured() << '\n';
    for (std::size_t i = 0; i < b.n_punctured(); ++i)
        out << (i ? " " : "") << b.punctured_cols()[i];
    out << '\n';
    for (std::size_t i = 0; i < b.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j)
            out << (j ? " " : "") << b.at(i, j);
        out << '\n';
    }
}

void save_base_matrix(const std::string& path, const BaseMatrix& b) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write base matrix file: " + path);
    write_base_matrix(out, b);
}

BaseMatrix resolve_base_matrix(const std::string& spec) {
    constexpr const char* prefix = "builtin:";
    if (spec.rfind(prefix, 0) == 0)
        return builtin(builtin_from_name(spec.substr(8)));
    return load_base_matrix(spec);
}

} // namespace asyncra::proto
