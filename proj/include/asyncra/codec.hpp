#pragma once

#include "asyncra/protograph.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace asyncra::codec {

// Lifted quasi-cyclic LDPC code: sparse parity-check matrix, puncture mask
// and a precomputed systematic transform. Immutable after construction and
// safe to share across threads; bp_decode keeps its message state per call.
class CodeInstance {
public:
    struct Circulant {
        std::size_t row_type, col_type;
        std::size_t shift;
    };

    CodeInstance(const proto::BaseMatrix& base, std::size_t z,
                 std::vector<Circulant> circulants);

    std::size_t z() const { return z_; }
    std::size_t n_total() const { return n_total_; }   // z * n_b
    std::size_t m_total() const { return m_total_; }   // z * m_b
    std::size_t n_tx() const { return n_tx_; }         // z * (n_b - p_b)
    std::size_t k() const { return k_; }
    std::size_t rank() const { return n_total_ - k_; }
    std::size_t n_edges() const { return edge_var_.size(); }
    const proto::BaseMatrix& base() const { return base_; }
    const std::vector<Circulant>& circulants() const { return circulants_; }

    bool is_punctured_bit(std::size_t v) const { return puncture_mask_[v]; }
    // transmitted position t -> variable index
    std::size_t tx_to_var(std::size_t t) const { return tx_map_[t]; }
    // variable-node type of variable index v
    std::size_t var_type(std::size_t v) const { return v / z_; }

    // column weight of variable v / row weight of check c in H
    std::size_t var_degree(std::size_t v) const;
    std::size_t check_degree(std::size_t c) const;

    bool in_systematic_form() const { return rank() == m_total_; }

    // --- operations ---

    // info (k bits) -> full codeword (n_total bits, punctured included)
    std::vector<std::uint8_t> encode(std::span<const std::uint8_t> info) const;

    // number of unsatisfied checks; 0 iff valid codeword
    std::size_t syndrome_weight(std::span<const std::uint8_t> bits) const;

    struct DecodeResult {
        std::vector<std::uint8_t> bits;
        bool success = false;
        std::size_t iterations = 0;
    };
    // flooding sum-product over channel LLRs (positive favors bit 0);
    // punctured positions are expected to carry LLR 0
    DecodeResult bp_decode(std::span<const double> llr,
                           std::size_t max_iter) const;

    // count of length-4 cycles in H (diagnostic for the lifting)
    std::size_t count_4cycles() const;

    void write_alist(std::ostream& out) const;

private:
    void build_graph();
    void build_encoder();

    proto::BaseMatrix base_;
    std::size_t z_;
    std::size_t n_total_, m_total_, n_tx_, k_;
    std::vector<Circulant> circulants_;
    std::vector<bool> puncture_mask_;
    std::vector<std::size_t> tx_map_;

    // edge-centric adjacency, edges grouped by check node
    std::vector<std::uint32_t> edge_var_;         // edge -> variable
    std::vector<std::uint32_t> check_edge_begin_; // check -> first edge
    std::vector<std::vector<std::uint32_t>> var_edges_;

    // H rows as bitsets for syndrome computation
    std::size_t words_per_row_;
    std::vector<std::uint64_t> h_rows_;

    // reduced-row-echelon transform: pivot columns and combination rows over
    // free (information) columns
    std::vector<std::uint32_t> pivot_cols_;
    std::vector<std::uint32_t> free_cols_;
    std::vector<std::uint64_t> rref_rows_;
};

// Quasi-cyclic expansion of a base matrix: every entry b_ij = t becomes t
// distinct z x z circulant permutations; shifts picked greedily to avoid
// 4-cycles where possible, randomized tie-break. Deterministic given seed.
// Throws if z < max entry or if H comes out rank-deficient (retry with a
// different seed).
CodeInstance lift(const proto::BaseMatrix& b, std::size_t z,
                  std::uint64_t seed);

} // namespace asyncra::codec
