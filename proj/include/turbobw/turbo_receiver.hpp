#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "turbobw/baum_welch.hpp"
#include "turbobw/bcjr.hpp"
#include "turbobw/comm_chain.hpp"
#include "turbobw/logdomain.hpp"
#include "turbobw/params.hpp"
#include "turbobw/table.hpp"
#include "turbobw/trellis.hpp"

namespace turbobw {

enum class ReceiverMode {
    kJoint,           // estimator inside the turbo loop, decoder feedback as priors
    kStandalone,      // estimator runs on fixed uniform priors, one final decode
    kConventionalBw,  // standalone on the state-tied (conventional) trellis
};

struct ReceiverConfig {
    ReceiverMode mode = ReceiverMode::kJoint;
    int n_turbo_iters = 20;
    int em_iters_per_turbo = 1;  // 0 freezes the estimator (plain turbo equalization)
    VarianceMode variance_mode = VarianceMode::kFixedTrue;
    bool warm_start = true;  // continue emissions across turbo iterations
    double prior_floor = 1e-6;
};

struct IterationRecord {
    double mse = 0.0;
    double log_evidence = 0.0;
    std::optional<double> ber;                // measured only when a decode ran
    std::optional<double> extrinsic_entropy;  // bits/symbol, from the equalizer output
    long clamp_events = 0;

    bool operator==(const IterationRecord&) const = default;
};

struct IterationTrace {
    std::vector<IterationRecord> records;

    bool operator==(const IterationTrace&) const = default;
};

// Everything that stays fixed while frames stream through the receiver.
// Non-owning view; the caller keeps the referenced objects alive.
struct ReceiverSystem {
    const TrellisSpec& isi_reduced;
    const TrellisSpec& isi_conventional;
    const TrellisSpec& code;
    const Interleaver& interleaver;
    const std::vector<double>& true_means;  // per-param noiseless outputs
    int info_len = 0;                       // K
};

struct EqualizeResult {
    Table extrinsic;  // p(y | x_t) up to per-t normalization
    Table joint;      // p(x_t, y) up to per-t normalization
    double log_evidence = 0.0;
};

// BCJR equalization over an ISI trellis followed by the extrinsic division
// that removes the fed-in symbol priors.
inline EqualizeResult equalize(std::span<const double> received, const TrellisSpec& isi,
                               const EdgeGaussianTable& emissions, const Table& symbol_priors,
                               long* clamp_events = nullptr) {
    const Table gamma = bcjr::branch_metrics(received, {isi, emissions, symbol_priors});
    const bcjr::SoftSequence soft = bcjr::infer(gamma, isi);
    Table joint = bcjr::symbol_joint(soft.log_edge_posterior, isi);
    Table extrinsic = bcjr::extrinsic_divide(joint, symbol_priors, clamp_events);
    return {std::move(extrinsic), std::move(joint), soft.log_evidence};
}

struct DecodeResult {
    std::vector<std::uint8_t> info_bits;  // hard decisions, flush steps excluded
    Table info_posteriors;                // K x 2
    Table coded_extrinsic;                // p(c_k), same shape as the input table
};

// MAP decoding on the code trellis. The input table holds p(y | c_k) per
// coded bit; input-bit priors are uniform over the K info steps and pinned
// to the known zero flush bits after them. Frames are terminated, so the
// backward recursion starts one-hot at state 0.
inline DecodeResult decode(const Table& coded_bit_probs, const TrellisSpec& code, int info_len,
                           long* clamp_events = nullptr) {
    const int n = code.outputs_per_edge;
    if (n < 1) throw std::invalid_argument("decode requires a code trellis with output bits");
    if (coded_bit_probs.cols() != 2)
        throw std::invalid_argument("coded bit table must have two columns");
    if (coded_bit_probs.rows() % n != 0)
        throw std::invalid_argument("coded bit table length is not a multiple of the code rate");
    const std::size_t steps = coded_bit_probs.rows() / n;
    if (info_len < 1 || static_cast<std::size_t>(info_len) > steps)
        throw std::invalid_argument("info_len inconsistent with coded bit table");

    constexpr double kLogHalf = -0.6931471805599453;
    Table gamma(steps, code.num_edges(), kNegInf);
    for (std::size_t k = 0; k < steps; ++k) {
        const bool flush = k >= static_cast<std::size_t>(info_len);
        for (int e = 0; e < code.num_edges(); ++e) {
            const Edge& ed = code.edges[e];
            if (flush && ed.input != 0) continue;  // flush inputs are known zeros
            double lg = flush ? 0.0 : kLogHalf;
            for (int j = 0; j < n; ++j) {
                const double p = coded_bit_probs(k * n + j, code.output_bit(e, j));
                lg += p > 0.0 ? std::log(p) : kNegInf;
            }
            gamma(k, e) = lg;
        }
    }

    std::vector<double> terminal(code.num_states, kNegInf);
    terminal[0] = 0.0;
    const bcjr::SoftSequence soft = bcjr::infer(gamma, code, terminal);

    DecodeResult r;
    r.info_posteriors = Table(info_len, 2, 0.0);
    Table coded_joint(coded_bit_probs.rows(), 2, 0.0);
    for (std::size_t k = 0; k < steps; ++k)
        for (int e = 0; e < code.num_edges(); ++e) {
            const double p = std::exp(soft.log_edge_posterior(k, e));
            const Edge& ed = code.edges[e];
            if (k < static_cast<std::size_t>(info_len)) r.info_posteriors(k, ed.input) += p;
            for (int j = 0; j < n; ++j) coded_joint(k * n + j, code.output_bit(e, j)) += p;
        }

    r.info_bits.resize(info_len);
    for (int k = 0; k < info_len; ++k)
        r.info_bits[k] = r.info_posteriors(k, 1) > r.info_posteriors(k, 0) ? 1 : 0;
    r.coded_extrinsic = bcjr::extrinsic_divide(coded_joint, coded_bit_probs, clamp_events);
    return r;
}

namespace detail {

inline double bit_error_rate(std::span<const std::uint8_t> decided,
                             std::span<const std::uint8_t> truth) {
    if (decided.size() != truth.size()) throw std::invalid_argument("BER length mismatch");
    std::size_t errors = 0;
    for (std::size_t k = 0; k < decided.size(); ++k) errors += decided[k] != truth[k];
    return static_cast<double>(errors) / static_cast<double>(decided.size());
}

inline double mean_entropy_bits(const Table& probs) {
    double acc = 0.0;
    for (std::size_t t = 0; t < probs.rows(); ++t)
        for (std::size_t x = 0; x < probs.cols(); ++x) {
            const double p = probs(t, x);
            if (p > 0.0) acc -= p * std::log2(p);
        }
    return acc / static_cast<double>(probs.rows());
}

inline void floor_and_normalize_rows(Table& probs, double floor, long* clamp_events) {
    for (std::size_t t = 0; t < probs.rows(); ++t) {
        double sum = 0.0;
        for (std::size_t x = 0; x < probs.cols(); ++x) {
            if (probs(t, x) < floor) {
                probs(t, x) = floor;
                if (clamp_events) ++*clamp_events;
            }
            sum += probs(t, x);
        }
        for (std::size_t x = 0; x < probs.cols(); ++x) probs(t, x) /= sum;
    }
}

}  // namespace detail

// Joint mode: each turbo iteration runs the estimator E/M step(s) under the
// current symbol priors, equalizes with the refreshed emissions, decodes,
// and maps the decoder extrinsics back into symbol priors for both the
// equalizer and the estimator. The first iteration sees uniform priors.
inline IterationTrace run_joint(const TxFrame& frame, const ReceiverSystem& sys,
                                const InitSpec& init, const ReceiverConfig& cfg) {
    if (cfg.n_turbo_iters < 1) throw std::invalid_argument("n_turbo_iters must be >= 1");
    if (cfg.em_iters_per_turbo < 0)
        throw std::invalid_argument("em_iters_per_turbo must be >= 0");

    const std::size_t T = frame.received.size();
    EdgeGaussianTable emissions = make_initial_emissions(init, sys.isi_reduced.num_params);
    Table priors = uniform_priors(T);
    bw::EmOptions em_opts{cfg.variance_mode};

    IterationTrace trace;
    trace.records.reserve(cfg.n_turbo_iters);
    for (int it = 0; it < cfg.n_turbo_iters; ++it) {
        IterationRecord rec;
        if (!cfg.warm_start && it > 0)
            emissions = make_initial_emissions(init, sys.isi_reduced.num_params);

        double em_evidence = kNegInf;
        for (int i = 0; i < cfg.em_iters_per_turbo; ++i) {
            const bw::EmIteration em = bw::em_iterate(frame.received, sys.isi_reduced, emissions,
                                                      priors, em_opts, &sys.true_means);
            em_evidence = em.log_evidence;
        }

        const EqualizeResult eq =
            equalize(frame.received, sys.isi_reduced, emissions, priors, &rec.clamp_events);
        const Table coded_probs =
            sys.interleaver.deinterleave_rows(soft_demap(eq.extrinsic));
        const DecodeResult dec =
            decode(coded_probs, sys.code, sys.info_len, &rec.clamp_events);

        Table next_priors = soft_map(sys.interleaver.interleave_rows(dec.coded_extrinsic));
        detail::floor_and_normalize_rows(next_priors, cfg.prior_floor, &rec.clamp_events);
        priors = std::move(next_priors);

        rec.mse = bw::channel_mse(emissions.means, sys.true_means);
        rec.log_evidence = cfg.em_iters_per_turbo > 0 ? em_evidence : eq.log_evidence;
        rec.ber = detail::bit_error_rate(dec.info_bits, frame.info_bits);
        rec.extrinsic_entropy = detail::mean_entropy_bits(eq.extrinsic);
        trace.records.push_back(std::move(rec));
    }
    return trace;
}

namespace detail {

inline IterationTrace run_separate(const TxFrame& frame, const ReceiverSystem& sys,
                                   const TrellisSpec& estimation_trellis, const InitSpec& init,
                                   const ReceiverConfig& cfg) {
    if (cfg.n_turbo_iters < 1) throw std::invalid_argument("n_turbo_iters must be >= 1");
    const long total_em =
        static_cast<long>(cfg.n_turbo_iters) * std::max(cfg.em_iters_per_turbo, 1);

    const std::size_t T = frame.received.size();
    EdgeGaussianTable emissions = make_initial_emissions(init, estimation_trellis.num_params);
    const Table priors = uniform_priors(T);
    bw::EmOptions em_opts{cfg.variance_mode};

    IterationTrace trace;
    trace.records.reserve(total_em);
    for (long i = 0; i < total_em; ++i) {
        const bw::EmIteration em = bw::em_iterate(frame.received, estimation_trellis, emissions,
                                                  priors, em_opts, &sys.true_means);
        IterationRecord rec;
        rec.mse = em.mse;
        rec.log_evidence = em.log_evidence;
        trace.records.push_back(std::move(rec));
    }

    // single equalize + decode pass for the final BER
    IterationRecord& last = trace.records.back();
    const EqualizeResult eq =
        equalize(frame.received, estimation_trellis, emissions, priors, &last.clamp_events);
    const Table coded_probs = sys.interleaver.deinterleave_rows(soft_demap(eq.extrinsic));
    const DecodeResult dec = decode(coded_probs, sys.code, sys.info_len, &last.clamp_events);
    last.ber = bit_error_rate(dec.info_bits, frame.info_bits);
    last.extrinsic_entropy = mean_entropy_bits(eq.extrinsic);
    return trace;
}

}  // namespace detail

// Standalone (separate) design: the estimator never sees decoder feedback.
// One trace record per EM iteration; BER comes from a single decode at the
// end. Runs n_turbo_iters * em_iters_per_turbo EM iterations so joint and
// standalone traces cover the same EM budget.
inline IterationTrace run_standalone(const TxFrame& frame, const ReceiverSystem& sys,
                                     const InitSpec& init, const ReceiverConfig& cfg) {
    return detail::run_separate(frame, sys, sys.isi_reduced, init, cfg);
}

// Conventional baseline: standalone estimation on the state-tied trellis.
inline IterationTrace run_conventional_bw(const TxFrame& frame, const ReceiverSystem& sys,
                                          const InitSpec& init, const ReceiverConfig& cfg) {
    return detail::run_separate(frame, sys, sys.isi_conventional, init, cfg);
}

inline IterationTrace run_receiver(const TxFrame& frame, const ReceiverSystem& sys,
                                   const InitSpec& init, const ReceiverConfig& cfg) {
    switch (cfg.mode) {
        case ReceiverMode::kJoint:
            return run_joint(frame, sys, init, cfg);
        case ReceiverMode::kStandalone:
            return run_standalone(frame, sys, init, cfg);
        case ReceiverMode::kConventionalBw:
            return run_conventional_bw(frame, sys, init, cfg);
    }
    throw std::invalid_argument("unknown receiver mode");
}

}  // namespace turbobw
