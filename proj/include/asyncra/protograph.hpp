#pragma once

#include <cstdint>
#include <iosfwd>
#include <numeric>
#include <string>
#include <vector>

namespace asyncra::proto {

// Exact rational, used for design rates.
struct Rational {
    long num = 0;
    long den = 1;

    Rational() = default;
    Rational(long n, long d);

    bool operator==(const Rational&) const = default;
    double value() const { return static_cast<double>(num) / den; }
};

// Protograph base matrix. Entries are parallel-edge multiplicities between
// check-node types (rows) and variable-node types (columns). Punctured
// variable-node types are listed explicitly, in column order.
class BaseMatrix {
public:
    BaseMatrix(std::size_t rows, std::size_t cols,
               std::vector<int> entries, std::vector<std::size_t> punctured);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    int at(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }
    const std::vector<int>& entries() const { return entries_; }
    const std::vector<std::size_t>& punctured_cols() const { return punctured_; }
    std::size_t n_punctured() const { return punctured_.size(); }
    bool is_punctured(std::size_t j) const;

    int col_weight(std::size_t j) const;
    int row_weight(std::size_t i) const;
    int max_entry() const;
    // unpunctured column indices, in column order
    std::vector<std::size_t> unpunctured_cols() const;

    bool operator==(const BaseMatrix&) const = default;

private:
    std::size_t rows_, cols_;
    std::vector<int> entries_;
    std::vector<std::size_t> punctured_;
};

struct ColumnPermutation {
    // output column j is input column perm[j]
    std::vector<std::size_t> perm;

    ColumnPermutation() = default;
    explicit ColumnPermutation(std::vector<std::size_t> p);
    std::size_t size() const { return perm.size(); }
    ColumnPermutation inverse() const;
};

enum class Builtin { AdHoc, FiveG, FiveGPermuted };

Builtin builtin_from_name(const std::string& name);
const char* builtin_name(Builtin b);

// The two concrete designs plus the permuted 5G variant.
BaseMatrix builtin(Builtin which);
// The degree-grouped search result used to build FiveGPermuted.
ColumnPermutation fiveg_permutation();

Rational design_rate(const BaseMatrix& b);
bool is_edge_symmetric(const BaseMatrix& b);
BaseMatrix permute_columns(const BaseMatrix& b, const ColumnPermutation& p);

// Text format: line 1 "m_b n_b p_b"; line 2 the punctured column indices
// (blank when p_b = 0); then m_b rows of n_b entries. '#' starts a comment.
BaseMatrix read_base_matrix(std::istream& in);
BaseMatrix load_base_matrix(const std::string& path);
void write_base_matrix(std::ostream& out, const BaseMatrix& b);
void save_base_matrix(const std::string& path, const BaseMatrix& b);

// Parses "builtin:AdHoc" / "builtin:FiveG" / "builtin:FiveGPermuted" or a
// file path.
BaseMatrix resolve_base_matrix(const std::string& spec);

} // namespace asyncra::proto
