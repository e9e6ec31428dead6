#include "asyncra/codec.hpp"

#include "asyncra/kernels.hpp"
#include "asyncra/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace asyncra::codec {

namespace {
constexpr double kLlrClip = 30.0;
}

CodeInstance::CodeInstance(const proto::BaseMatrix& base, std::size_t z,
                           std::vector<Circulant> circulants)
    : base_(base), z_(z), circulants_(std::move(circulants)) {
    n_total_ = z_ * base_.cols();
    m_total_ = z_ * base_.rows();
    n_tx_ = z_ * (base_.cols() - base_.n_punctured());

    puncture_mask_.assign(n_total_, false);
    for (std::size_t j : base_.punctured_cols())
        for (std::size_t a = 0; a < z_; ++a) puncture_mask_[j * z_ + a] = true;
    tx_map_.reserve(n_tx_);
    for (std::size_t v = 0; v < n_total_; ++v)
        if (!puncture_mask_[v]) tx_map_.push_back(v);

    build_graph();
    build_encoder();
}

void CodeInstance::build_graph() {
    // adjacency grouped by check; circulant (i, j, s) links check i*z+a to
    // variable j*z+((a+s) mod z)
    std::vector<std::vector<std::uint32_t>> check_vars(m_total_);
    for (const auto& c : circulants_) {
        for (std::size_t a = 0; a < z_; ++a) {
            const std::size_t chk = c.row_type * z_ + a;
            const std::size_t var = c.col_type * z_ + (a + c.shift) % z_;
            check_vars[chk].push_back(static_cast<std::uint32_t>(var));
        }
    }
    check_edge_begin_.assign(m_total_ + 1, 0);
    for (std::size_t c = 0; c < m_total_; ++c) {
        std::sort(check_vars[c].begin(), check_vars[c].end());
        check_edge_begin_[c + 1] =
            check_edge_begin_[c] + static_cast<std::uint32_t>(check_vars[c].size());
    }
    edge_var_.clear();
    edge_var_.reserve(check_edge_begin_[m_total_]);
    var_edges_.assign(n_total_, {});
    for (std::size_t c = 0; c < m_total_; ++c)
        for (std::uint32_t v : check_vars[c]) {
            var_edges_[v].push_back(static_cast<std::uint32_t>(edge_var_.size()));
            edge_var_.push_back(v);
        }

    words_per_row_ = (n_total_ + 63) / 64;
    h_rows_.assign(m_total_ * words_per_row_, 0);
    for (std::size_t c = 0; c < m_total_; ++c)
        for (std::uint32_t e = check_edge_begin_[c]; e < check_edge_begin_[c + 1];
             ++e) {
            const std::uint32_t v = edge_var_[e];
            h_rows_[c * words_per_row_ + v / 64] ^= 1ull << (v % 64);
        }
}

void CodeInstance::build_encoder() {
    // full GF(2) reduced row echelon form of H; free columns carry the
    // information bits, pivot columns are computed from them
    std::vector<std::uint64_t> rows = h_rows_;
    const std::size_t W = words_per_row_;
    std::vector<std::uint32_t> pivot_of_row;
    pivot_cols_.clear();
    free_cols_.clear();

    std::size_t r = 0;
    std::vector<std::size_t> row_of(m_total_);
    for (std::size_t i = 0; i < m_total_; ++i) row_of[i] = i;
    for (std::size_t col = 0; col < n_total_ && r < m_total_; ++col) {
        std::size_t pr = m_total_;
        for (std::size_t i = r; i < m_total_; ++i)
            if ((rows[i * W + col / 64] >> (col % 64)) & 1) {
                pr = i;
                break;
            }
        if (pr == m_total_) {
            free_cols_.push_back(static_cast<std::uint32_t>(col));
            continue;
        }
        if (pr != r)
            for (std::size_t w = 0; w < W; ++w)
                std::swap(rows[r * W + w], rows[pr * W + w]);
        for (std::size_t i = 0; i < m_total_; ++i) {
            if (i == r) continue;
            if ((rows[i * W + col / 64] >> (col % 64)) & 1)
                for (std::size_t w = 0; w < W; ++w)
                    rows[i * W + w] ^= rows[r * W + w];
        }
        pivot_cols_.push_back(static_cast<std::uint32_t>(col));
        ++r;
    }
    for (std::size_t col = pivot_cols_.empty()
                               ? 0
                               : static_cast<std::size_t>(pivot_cols_.back()) + 1;
         free_cols_.size() + pivot_cols_.size() < n_total_; ++col)
        if (std::find(pivot_cols_.begin(), pivot_cols_.end(), col) ==
            pivot_cols_.end())
            free_cols_.push_back(static_cast<std::uint32_t>(col));
    std::sort(free_cols_.begin(), free_cols_.end());

    k_ = free_cols_.size();
    rref_rows_.assign(pivot_cols_.size() * W, 0);
    for (std::size_t i = 0; i < pivot_cols_.size(); ++i)
        for (std::size_t w = 0; w < W; ++w)
            rref_rows_[i * W + w] = rows[i * W + w];
}

std::size_t CodeInstance::var_degree(std::size_t v) const {
    return var_edges_[v].size();
}

std::size_t CodeInstance::check_degree(std::size_t c) const {
    return check_edge_begin_[c + 1] - check_edge_begin_[c];
}

std::vector<std::uint8_t>
CodeInstance::encode(std::span<const std::uint8_t> info) const {
    if (info.size() != k_)
        throw std::invalid_argument("encode: info length != k");
    if (!in_systematic_form())
        throw std::runtime_error(
            "encode: parity-check matrix is rank-deficient; re-lift with a "
            "different seed");
    const std::size_t W = words_per_row_;
    std::vector<std::uint64_t> word(W, 0);
    for (std::size_t i = 0; i < k_; ++i)
        if (info[i]) word[free_cols_[i] / 64] ^= 1ull << (free_cols_[i] % 64);
    for (std::size_t i = 0; i < pivot_cols_.size(); ++i) {
        std::uint64_t acc = 0;
        for (std::size_t w = 0; w < W; ++w)
            acc ^= rref_rows_[i * W + w] & word[w];
        if (std::popcount(acc) & 1)
            word[pivot_cols_[i] / 64] ^= 1ull << (pivot_cols_[i] % 64);
    }
    std::vector<std::uint8_t> out(n_total_);
    for (std::size_t v = 0; v < n_total_; ++v)
        out[v] = static_cast<std::uint8_t>((word[v / 64] >> (v % 64)) & 1);
    return out;
}

std::size_t
CodeInstance::syndrome_weight(std::span<const std::uint8_t> bits) const {
    if (bits.size() != n_total_)
        throw std::invalid_argument("syndrome: bit vector length mismatch");
    const std::size_t W = words_per_row_;
    std::vector<std::uint64_t> word(W, 0);
    for (std::size_t v = 0; v < n_total_; ++v)
        if (bits[v]) word[v / 64] ^= 1ull << (v % 64);
    std::size_t weight = 0;
    for (std::size_t c = 0; c < m_total_; ++c) {
        std::uint64_t acc = 0;
        for (std::size_t w = 0; w < W; ++w)
            acc ^= h_rows_[c * W + w] & word[w];
        weight += std::popcount(acc) & 1;
    }
    return weight;
}

CodeInstance::DecodeResult
CodeInstance::bp_decode(std::span<const double> llr,
                        std::size_t max_iter) const {
    if (llr.size() != n_total_)
        throw std::invalid_argument("bp_decode: LLR length mismatch");
    if (max_iter < 1)
        throw std::invalid_argument("bp_decode: max_iter must be >= 1");
    for (double l : llr)
        if (!std::isfinite(l))
            throw std::invalid_argument("bp_decode: non-finite channel LLR");

    const auto& k = kernels::active();
    const std::size_t E = edge_var_.size();
    std::vector<double> ch(llr.begin(), llr.end());
    k.clamp(ch.data(), -kLlrClip, kLlrClip, ch.size());

    std::vector<double> v2c(E), c2v(E), tnh(E), total(n_total_);
    std::vector<double> fwd, bwd;
    for (std::size_t e = 0; e < E; ++e) v2c[e] = ch[edge_var_[e]];

    DecodeResult res;
    res.bits.assign(n_total_, 0);
    std::vector<std::uint64_t> word(words_per_row_);

    for (std::size_t it = 1; it <= max_iter; ++it) {
        // check-node pass in the tanh domain
        k.tanh_half(tnh.data(), v2c.data(), E);
        for (std::size_t c = 0; c < m_total_; ++c) {
            const std::uint32_t b = check_edge_begin_[c];
            const std::uint32_t d = check_edge_begin_[c + 1] - b;
            if (d == 1) {
                // a weight-1 row pins its variable to zero
                c2v[b] = 1.0 - 1e-16; // atanh2 maps this near the clip
                continue;
            }
            fwd.resize(d);
            bwd.resize(d);
            fwd[0] = tnh[b];
            bwd[d - 1] = tnh[b + d - 1];
            for (std::uint32_t i = 1; i < d; ++i) {
                fwd[i] = fwd[i - 1] * tnh[b + i];
                bwd[d - 1 - i] = bwd[d - i] * tnh[b + d - 1 - i];
            }
            c2v[b] = bwd[1];
            c2v[b + d - 1] = fwd[d - 2];
            for (std::uint32_t i = 1; i + 1 < d; ++i)
                c2v[b + i] = fwd[i - 1] * bwd[i + 1];
        }
        k.atanh2(c2v.data(), c2v.data(), E);
        k.clamp(c2v.data(), -kLlrClip, kLlrClip, E);

        // variable-node pass
        for (std::size_t v = 0; v < n_total_; ++v) {
            double t = ch[v];
            for (std::uint32_t e : var_edges_[v]) t += c2v[e];
            total[v] = t;
            for (std::uint32_t e : var_edges_[v]) v2c[e] = t - c2v[e];
        }
        k.clamp(v2c.data(), -kLlrClip, kLlrClip, E);

        // hard decision + syndrome, early termination
        std::fill(word.begin(), word.end(), 0);
        for (std::size_t v = 0; v < n_total_; ++v) {
            const std::uint8_t bit = total[v] < 0.0;
            res.bits[v] = bit;
            if (bit) word[v / 64] ^= 1ull << (v % 64);
        }
        bool ok = true;
        for (std::size_t c = 0; c < m_total_ && ok; ++c) {
            std::uint64_t acc = 0;
            for (std::size_t w = 0; w < words_per_row_; ++w)
                acc ^= h_rows_[c * words_per_row_ + w] & word[w];
            ok = (std::popcount(acc) & 1) == 0;
        }
        res.iterations = it;
        if (ok) {
            res.success = true;
            return res;
        }
    }
    return res;
}

std::size_t CodeInstance::count_4cycles() const {
    // 4-cycles from circulant algebra: a rectangle of circulants closes z
    // cycles when s1 + s4 == s2 + s3 (mod z); a same-cell pair closes z/2
    // cycles when 2(s1 - s2) == 0 (mod z).
    std::size_t same_cell = 0, rect = 0;
    const auto& cs = circulants_;
    for (std::size_t a = 0; a < cs.size(); ++a)
        for (std::size_t b = a + 1; b < cs.size(); ++b) {
            if (cs[a].row_type == cs[b].row_type &&
                cs[a].col_type == cs[b].col_type) {
                if ((2 * (z_ + cs[a].shift - cs[b].shift)) % z_ == 0)
                    same_cell += z_ / 2;
                continue;
            }
            if (cs[a].row_type == cs[b].row_type ||
                cs[a].col_type == cs[b].col_type)
                continue;
            for (std::size_t c = 0; c < cs.size(); ++c) {
                if (cs[c].row_type != cs[a].row_type ||
                    cs[c].col_type != cs[b].col_type)
                    continue;
                for (std::size_t d = 0; d < cs.size(); ++d) {
                    if (cs[d].row_type != cs[b].row_type ||
                        cs[d].col_type != cs[a].col_type)
                        continue;
                    const std::size_t lhs = (cs[a].shift + cs[b].shift) % z_;
                    const std::size_t rhs = (cs[c].shift + cs[d].shift) % z_;
                    if (lhs == rhs) rect += z_;
                }
            }
        }
    // each rectangle is visited from both diagonal pairs
    return same_cell + rect / 2;
}

void CodeInstance::write_alist(std::ostream& out) const {
    out << n_total_ << ' ' << m_total_ << '\n';
    std::size_t max_v = 0, max_c = 0;
    for (std::size_t v = 0; v < n_total_; ++v)
        max_v = std::max(max_v, var_degree(v));
    for (std::size_t c = 0; c < m_total_; ++c)
        max_c = std::max(max_c, check_degree(c));
    out << max_v << ' ' << max_c << '\n';
    for (std::size_t v = 0; v < n_total_; ++v)
        out << (v ? " " : "") << var_degree(v);
    out << '\n';
    for (std::size_t c = 0; c < m_total_; ++c)
        out << (c ? " " : "") << check_degree(c);
    out << '\n';
    for (std::size_t v = 0; v < n_total_; ++v) {
        for (std::size_t i = 0; i < max_v; ++i) {
            std::size_t entry = 0; // 1-based, zero-padded
            if (i < var_edges_[v].size()) {
                // check index of this edge
                const std::uint32_t e = var_edges_[v][i];
                const auto it = std::upper_bound(check_edge_begin_.begin(),
                                                 check_edge_begin_.end(), e);
                entry = static_cast<std::size_t>(
                            it - check_edge_begin_.begin());
            }
            out << (i ? " " : "") << entry;
        }
        out << '\n';
    }
    for (std::size_t c = 0; c < m_total_; ++c) {
        for (std::size_t i = 0; i < max_c; ++i) {
            std::size_t entry = 0;
            if (i < check_degree(c))
                entry = edge_var_[check_edge_begin_[c] + i] + 1;
            out << (i ? " " : "") << entry;
        }
        out << '\n';
    }
}

CodeInstance lift(const proto::BaseMatrix& b, std::size_t z,
                  std::uint64_t seed) {
    if (z < static_cast<std::size_t>(b.max_entry()))
        throw std::invalid_argument(
            "lift: z smaller than the largest base matrix entry");
    Rng rng(mix_seed(seed, 0x11f7ull));

    std::vector<CodeInstance::Circulant> placed;
    // incremental 4-cycle count for a candidate against already placed
    const auto cycles_created = [&](std::size_t i, std::size_t j,
                                    std::size_t s) {
        std::size_t created = 0;
        for (const auto& c : placed) {
            if (c.row_type == i && c.col_type == j) {
                if ((2 * (z + s - c.shift)) % z == 0) ++created;
                continue;
            }
            if (c.row_type == i || c.col_type == j) continue;
            // c = (i2, j2); close the rectangle with (i, j2) and (i2, j)
            for (const auto& e1 : placed) {
                if (e1.row_type != i || e1.col_type != c.col_type) continue;
                for (const auto& e2 : placed) {
                    if (e2.row_type != c.row_type || e2.col_type != j) continue;
                    if ((s + c.shift) % z == (e1.shift + e2.shift) % z)
                        ++created;
                }
            }
        }
        return created;
    };

    std::vector<std::size_t> shifts(z);
    for (std::size_t i = 0; i < b.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            for (int t = 0; t < b.at(i, j); ++t) {
                std::size_t best_cost = SIZE_MAX;
                std::size_t n_best = 0;
                for (std::size_t s = 0; s < z; ++s) {
                    bool duplicate = false;
                    for (const auto& c : placed)
                        if (c.row_type == i && c.col_type == j && c.shift == s)
                            duplicate = true;
                    if (duplicate) continue;
                    const std::size_t cost = cycles_created(i, j, s);
                    if (cost < best_cost) {
                        best_cost = cost;
                        n_best = 0;
                    }
                    if (cost == best_cost) shifts[n_best++] = s;
                }
                if (n_best == 0)
                    throw std::invalid_argument(
                        "lift: cannot place distinct circulants, z too small");
                placed.push_back(
                    {i, j, shifts[rng.below(n_best)]});
            }
        }
    }

    CodeInstance code(b, z, std::move(placed));
    if (!code.in_systematic_form())
        throw std::runtime_error(
            "lift: H is rank-deficient; re-lift with a different seed");
    return code;
}

} // namespace asyncra::codec
