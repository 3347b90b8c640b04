#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "turbobw/table.hpp"

namespace turbobw {

// One labeled trellis transition. `param` selects the Gaussian emission
// attached to the transition (or, for code trellises, indexes the per-edge
// output bits).
struct Edge {
    int from = 0;
    int to = 0;
    int input = 0;  // input symbol index driving the transition
    int param = 0;

    bool operator==(const Edge&) const = default;
};

// Finite-state machine shared by the equalizer, the estimator and the
// decoder. The builders below fix the conventions:
//   - a state is the integer whose base-|X| digits hold the symbol history,
//     most recent symbol in the lowest digit;
//   - param indices enumerate symbol tuples with the same digit layout, so
//     a reduced-trellis edge and the conventional state carrying the same
//     tuple share one param index.
struct TrellisSpec {
    int num_states = 0;
    int num_inputs = 0;
    int num_params = 0;
    std::vector<Edge> edges;
    std::vector<double> initial_distribution;

    // Code trellises only: n output bits per edge, flattened edge-major.
    int outputs_per_edge = 0;
    std::vector<std::uint8_t> output_bits;

    // edge ids grouped by endpoint, built by finalize()
    std::vector<std::vector<int>> edges_from;
    std::vector<std::vector<int>> edges_into;

    int num_edges() const { return static_cast<int>(edges.size()); }

    std::uint8_t output_bit(int edge, int j) const {
        return output_bits[static_cast<std::size_t>(edge) * outputs_per_edge + j];
    }

    // Builds the adjacency index and checks the structural invariants:
    // deterministic (state, input) -> edge map, contiguous param range,
    // normalized initial distribution.
    void finalize() {
        edges_from.assign(num_states, {});
        edges_into.assign(num_states, {});
        std::vector<std::vector<char>> seen(num_states, std::vector<char>(num_inputs, 0));
        std::vector<char> param_seen(num_params, 0);
        for (int e = 0; e < num_edges(); ++e) {
            const Edge& ed = edges[e];
            if (ed.from < 0 || ed.from >= num_states || ed.to < 0 || ed.to >= num_states)
                throw std::invalid_argument("trellis edge endpoint out of range");
            if (ed.input < 0 || ed.input >= num_inputs)
                throw std::invalid_argument("trellis edge input out of range");
            if (ed.param < 0 || ed.param >= num_params)
                throw std::invalid_argument("trellis edge param out of range");
            if (seen[ed.from][ed.input]++)
                throw std::invalid_argument("duplicate (state, input) transition");
            param_seen[ed.param] = 1;
            edges_from[ed.from].push_back(e);
            edges_into[ed.to].push_back(e);
        }
        for (char s : param_seen)
            if (!s) throw std::invalid_argument("param indices do not cover 0..num_params-1");
        if (static_cast<int>(initial_distribution.size()) != num_states)
            throw std::invalid_argument("initial distribution size mismatch");
        double sum = 0.0;
        for (double p : initial_distribution) {
            if (p < 0.0) throw std::invalid_argument("initial distribution has negative mass");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("initial distribution must sum to 1");
    }
};

namespace detail {

inline int pow_int(int base, int exp) {
    int r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

// Output bit of one generator for input bit b entering state s. Generator
// masks are read MSB-first: bit constraint_registers of the mask taps the
// current input, bit (constraint_registers - i) taps the i-th past bit.
inline std::uint8_t conv_output_bit(unsigned generator, int constraint_registers, int input_bit,
                                    int state) {
    unsigned acc = ((generator >> constraint_registers) & 1u) & static_cast<unsigned>(input_bit);
    for (int i = 1; i <= constraint_registers; ++i)
        acc ^= ((generator >> (constraint_registers - i)) & 1u) &
               static_cast<unsigned>((state >> (i - 1)) & 1);
    return static_cast<std::uint8_t>(acc);
}

}  // namespace detail

// ISI trellis with one state per length-L symbol tuple; the emission param
// of every edge is its destination state. |S| = |X|^L.
inline TrellisSpec build_isi_trellis_conventional(int channel_memory, int alphabet_size = 2) {
    if (channel_memory < 1)
        throw std::invalid_argument("channel_memory must be >= 1");
    if (alphabet_size != 2)
        throw std::invalid_argument("only BPSK (alphabet_size = 2) is supported");
    const int L = channel_memory;
    const int m = alphabet_size;
    const int states = detail::pow_int(m, L);
    const int carry = states / m;  // |X|^(L-1)

    TrellisSpec t;
    t.num_states = states;
    t.num_inputs = m;
    t.num_params = states;
    t.edges.reserve(static_cast<std::size_t>(states) * m);
    for (int s = 0; s < states; ++s)
        for (int u = 0; u < m; ++u) {
            const int to = u + m * (s % carry);
            t.edges.push_back({s, to, u, to});
        }
    t.initial_distribution.assign(states, 1.0 / states);
    t.finalize();
    return t;
}

// Reduced-state ISI trellis: |X|^(L-1) states, emission params attached to
// edges. Each edge spans the L-symbol tuple formed by its input symbol and
// the source state's history, so num_params stays |X|^L.
inline TrellisSpec build_isi_trellis_reduced(int channel_memory) {
    if (channel_memory < 1)
        throw std::invalid_argument("channel_memory must be >= 1");
    const int L = channel_memory;
    const int m = 2;
    const int states = detail::pow_int(m, L - 1);
    const int carry = (L >= 2) ? states / m : 1;

    TrellisSpec t;
    t.num_states = states;
    t.num_inputs = m;
    t.num_params = states * m;
    t.edges.reserve(static_cast<std::size_t>(states) * m);
    for (int s = 0; s < states; ++s)
        for (int u = 0; u < m; ++u) {
            const int to = (L == 1) ? 0 : u + m * (s % carry);
            t.edges.push_back({s, to, u, u + m * s});
        }
    t.initial_distribution.assign(states, 1.0 / states);
    t.finalize();
    return t;
}

// Rate-1/n feed-forward convolutional code trellis over 2^constraint_registers
// states. Generators are tap masks (octal notation in configs); each edge
// carries its input bit and the n coded output bits. The encoder starts
// zeroed, so the initial distribution is one-hot at state 0.
inline TrellisSpec build_conv_trellis(const std::vector<unsigned>& generators,
                                      int constraint_registers) {
    if (generators.empty())
        throw std::invalid_argument("at least one generator is required");
    if (constraint_registers < 0 || constraint_registers > 20)
        throw std::invalid_argument("constraint_registers out of range");
    const int Lc = constraint_registers;
    for (unsigned g : generators)
        if (g == 0 || g >= (1u << (Lc + 1)))
            throw std::invalid_argument("generator degree exceeds constraint_registers");

    const int n = static_cast<int>(generators.size());
    const int states = 1 << Lc;
    const int carry = states / 2;  // 0 when Lc == 0

    TrellisSpec t;
    t.num_states = states;
    t.num_inputs = 2;
    t.outputs_per_edge = n;
    for (int s = 0; s < states; ++s)
        for (int b = 0; b < 2; ++b) {
            const int to = (Lc == 0) ? 0 : b + 2 * (s % carry);
            t.edges.push_back({s, to, b, static_cast<int>(t.edges.size())});
            for (unsigned g : generators)
                t.output_bits.push_back(detail::conv_output_bit(g, Lc, b, s));
        }
    t.num_params = t.num_edges();
    t.initial_distribution.assign(states, 0.0);
    t.initial_distribution[0] = 1.0;
    t.finalize();
    return t;
}

// Reduced-trellis edges and conventional states enumerate the same symbol
// tuples; map[e] is the conventional state carrying edge e's tuple.
inline std::vector<int> reduced_edge_to_state_map(const TrellisSpec& reduced,
                                                  const TrellisSpec& conventional) {
    if (reduced.num_params != conventional.num_states ||
        reduced.num_params != conventional.num_params ||
        reduced.num_edges() != conventional.num_states)
        throw std::invalid_argument("trellises were not built from the same channel memory");
    std::vector<int> map(reduced.num_edges());
    for (int e = 0; e < reduced.num_edges(); ++e) map[e] = reduced.edges[e].param;
    return map;
}

// Permutes reduced-trellis edge posteriors into conventional state indexing.
inline Table edge_posterior_to_state_posterior(const Table& edge_posteriors,
                                               const std::vector<int>& map, int num_states) {
    if (edge_posteriors.cols() != map.size() || static_cast<std::size_t>(num_states) != map.size())
        throw std::invalid_argument("edge posterior / map dimension mismatch");
    Table out(edge_posteriors.rows(), num_states, 0.0);
    for (std::size_t r = 0; r < edge_posteriors.rows(); ++r)
        for (std::size_t e = 0; e < map.size(); ++e)
            out(r, map[e]) = edge_posteriors(r, e);
    return out;
}

}  // namespace turbobw
