#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbobw/rng.hpp"
#include "turbobw/table.hpp"
#include "turbobw/trellis.hpp"

namespace turbobw {

// Rate-1/n feed-forward convolutional encoder. constraint_registers zero
// flush bits are appended so the encoder ends in state 0; the output holds
// n * (K + Lc) bits grouped per input bit in generator order.
inline std::vector<std::uint8_t> conv_encode(std::span<const std::uint8_t> info_bits,
                                             const std::vector<unsigned>& generators,
                                             int constraint_registers) {
    if (generators.empty())
        throw std::invalid_argument("at least one generator is required");
    if (constraint_registers < 0 || constraint_registers > 20)
        throw std::invalid_argument("constraint_registers out of range");
    const int Lc = constraint_registers;
    for (unsigned g : generators)
        if (g == 0 || g >= (1u << (Lc + 1)))
            throw std::invalid_argument("generator degree exceeds constraint_registers");
    for (std::uint8_t b : info_bits)
        if (b > 1) throw std::invalid_argument("info bits must be 0 or 1");

    const std::size_t K = info_bits.size();
    const int carry = (Lc >= 1) ? (1 << (Lc - 1)) : 0;
    std::vector<std::uint8_t> out;
    out.reserve(generators.size() * (K + Lc));
    int state = 0;
    for (std::size_t k = 0; k < K + static_cast<std::size_t>(Lc); ++k) {
        const int b = k < K ? info_bits[k] : 0;
        for (unsigned g : generators)
            out.push_back(detail::conv_output_bit(g, Lc, b, state));
        state = (Lc == 0) ? 0 : b + 2 * (state % carry);
    }
    return out;
}

// Seeded uniform random bit permutation (Fisher-Yates). The same permutation
// is applied to hard bits and to soft value rows, so deinterleave is always
// the exact inverse of interleave.
class Interleaver {
public:
    Interleaver(std::size_t size, std::uint64_t seed) : seed_(seed), perm_(size) {
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        Rng rng(seed);
        for (std::size_t i = size; i > 1; --i)
            std::swap(perm_[i - 1], perm_[rng.next_below(i)]);
    }

    static Interleaver identity(std::size_t size) {
        Interleaver pi;
        pi.perm_.resize(size);
        std::iota(pi.perm_.begin(), pi.perm_.end(), std::size_t{0});
        return pi;
    }

    std::size_t size() const { return perm_.size(); }
    std::uint64_t seed() const { return seed_; }
    const std::vector<std::size_t>& permutation() const { return perm_; }

    template <typename T>
    std::vector<T> interleave(std::span<const T> v) const {
        check(v.size());
        std::vector<T> out(v.size());
        for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[perm_[k]];
        return out;
    }

    template <typename T>
    std::vector<T> deinterleave(std::span<const T> v) const {
        check(v.size());
        std::vector<T> out(v.size());
        for (std::size_t k = 0; k < v.size(); ++k) out[perm_[k]] = v[k];
        return out;
    }

    Table interleave_rows(const Table& in) const {
        check(in.rows());
        Table out(in.rows(), in.cols());
        for (std::size_t k = 0; k < in.rows(); ++k)
            for (std::size_t c = 0; c < in.cols(); ++c) out(k, c) = in(perm_[k], c);
        return out;
    }

    Table deinterleave_rows(const Table& in) const {
        check(in.rows());
        Table out(in.rows(), in.cols());
        for (std::size_t k = 0; k < in.rows(); ++k)
            for (std::size_t c = 0; c < in.cols(); ++c) out(perm_[k], c) = in(k, c);
        return out;
    }

private:
    Interleaver() = default;
    void check(std::size_t n) const {
        if (n != perm_.size())
            throw std::invalid_argument("sequence length does not match interleaver size");
    }
    std::uint64_t seed_ = 0;
    std::vector<std::size_t> perm_;
};

// BPSK convention: bit 0 -> +1, bit 1 -> -1. Symbol tables use the same
// column order as bit tables (column 0 is +1), so the soft mappings are
// pure relabelings.
inline double bpsk_symbol(int bit) { return bit ? -1.0 : +1.0; }

inline std::vector<double> bpsk_map(std::span<const std::uint8_t> bits) {
    std::vector<double> symbols(bits.size());
    for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k] > 1) throw std::invalid_argument("bits must be 0 or 1");
        symbols[k] = bpsk_symbol(bits[k]);
    }
    return symbols;
}

namespace detail {
inline Table checked_relabel(const Table& probs, const char* what) {
    if (probs.cols() != 2) throw std::invalid_argument("expected a two-column table");
    for (std::size_t t = 0; t < probs.rows(); ++t) {
        const double sum = probs(t, 0) + probs(t, 1);
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument(std::string(what) + " rows must sum to 1");
    }
    return probs;
}
}  // namespace detail

inline Table soft_map(const Table& bit_probs) {
    return detail::checked_relabel(bit_probs, "bit probability");
}

inline Table soft_demap(const Table& symbol_probs) {
    return detail::checked_relabel(symbol_probs, "symbol probability");
}

// One transmitted frame: every representation of the same payload from
// info bits down to received samples.
struct TxFrame {
    std::vector<std::uint8_t> info_bits;
    std::vector<std::uint8_t> coded_bits;
    std::vector<std::uint8_t> interleaved_bits;
    std::vector<double> symbols;
    std::vector<double> noiseless;
    std::vector<double> received;
};

// Transmit side only; channel_sim fills noiseless/received.
inline TxFrame build_tx_frame(int info_len, const std::vector<unsigned>& generators,
                              int constraint_registers, const Interleaver& pi,
                              std::uint64_t bits_seed) {
    if (info_len < 1) throw std::invalid_argument("info_len must be >= 1");
    TxFrame f;
    Rng rng(bits_seed);
    f.info_bits.resize(info_len);
    for (auto& b : f.info_bits) b = static_cast<std::uint8_t>(rng.next_bit());
    f.coded_bits = conv_encode(f.info_bits, generators, constraint_registers);
    f.interleaved_bits = pi.interleave(std::span<const std::uint8_t>(f.coded_bits));
    f.symbols = bpsk_map(f.interleaved_bits);
    return f;
}

}  // namespace turbobw
