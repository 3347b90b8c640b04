#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbobw/logdomain.hpp"
#include "turbobw/params.hpp"
#include "turbobw/table.hpp"
#include "turbobw/trellis.hpp"

namespace turbobw {

// Raised when an observation sequence has zero probability under the model.
// `t` is the 1-based time step where the recursion lost all mass.
class InferenceError : public std::runtime_error {
public:
    InferenceError(const std::string& what, std::size_t time)
        : std::runtime_error(what + " at t=" + std::to_string(time)), t(time) {}
    std::size_t t;
};

namespace bcjr {

inline double gaussian_log_pdf(double y, double mean, double variance) {
    constexpr double kLogTwoPi = 1.8378770664093454836;
    const double d = y - mean;
    return -0.5 * (kLogTwoPi + std::log(variance) + d * d / variance);
}

// T x num_params table of log p(y_t | param l).
inline Table observation_log_likelihoods(std::span<const double> observations,
                                         const EdgeGaussianTable& emissions) {
    const std::size_t T = observations.size();
    const std::size_t P = emissions.means.size();
    Table lik(T, P);
    for (std::size_t t = 0; t < T; ++t) {
        if (std::isnan(observations[t]))
            throw std::invalid_argument("observation is NaN at t=" + std::to_string(t + 1));
        for (std::size_t l = 0; l < P; ++l)
            lik(t, l) = gaussian_log_pdf(observations[t], emissions.means[l],
                                         emissions.variances[l]);
    }
    return lik;
}

// Branch metrics: log gamma_t(e) = log p(y_t | param(e)) + log p_t(x = input(e)).
// Transitions not present in the edge list implicitly carry -inf.
inline Table branch_metrics(std::span<const double> observations, const HmmParams& params) {
    const TrellisSpec& tr = params.trellis;
    params.emissions.validate(tr.num_params);
    if (params.symbol_priors.rows() != observations.size() ||
        params.symbol_priors.cols() != static_cast<std::size_t>(tr.num_inputs))
        throw std::invalid_argument("symbol prior table shape mismatch");
    validate_prior_rows(params.symbol_priors);

    const Table lik = observation_log_likelihoods(observations, params.emissions);
    const std::size_t T = observations.size();
    const int E = tr.num_edges();
    Table gamma(T, E);
    for (std::size_t t = 0; t < T; ++t) {
        // log priors once per row; edges reuse them
        double log_prior[2];
        std::vector<double> log_prior_wide;
        const double* lp = log_prior;
        if (tr.num_inputs <= 2) {
            for (int x = 0; x < tr.num_inputs; ++x) {
                const double p = params.symbol_priors(t, x);
                log_prior[x] = p > 0.0 ? std::log(p) : kNegInf;
            }
        } else {
            log_prior_wide.resize(tr.num_inputs);
            for (int x = 0; x < tr.num_inputs; ++x) {
                const double p = params.symbol_priors(t, x);
                log_prior_wide[x] = p > 0.0 ? std::log(p) : kNegInf;
            }
            lp = log_prior_wide.data();
        }
        for (int e = 0; e < E; ++e) {
            const Edge& ed = tr.edges[e];
            gamma(t, e) = lik(t, ed.param) + lp[ed.input];
        }
    }
    return gamma;
}

struct ForwardResult {
    Table log_alpha;             // (T+1) x S; row t holds beliefs after t observations
    std::vector<double> scale;   // per-row max removed before storing
    double log_evidence = 0.0;   // log p(y_1^T)
};

inline ForwardResult forward(const Table& log_gamma, const TrellisSpec& trellis) {
    if (log_gamma.cols() != static_cast<std::size_t>(trellis.num_edges()))
        throw std::invalid_argument("log_gamma column count does not match trellis edges");
    const std::size_t T = log_gamma.rows();
    const int S = trellis.num_states;

    ForwardResult r;
    r.log_alpha = Table(T + 1, S, kNegInf);
    r.scale.assign(T + 1, 0.0);

    for (int s = 0; s < S; ++s) {
        const double p = trellis.initial_distribution[s];
        r.log_alpha(0, s) = p > 0.0 ? std::log(p) : kNegInf;
    }
    double m = max_value(r.log_alpha.row(0));
    for (int s = 0; s < S; ++s) r.log_alpha(0, s) -= m;
    r.scale[0] = m;

    for (std::size_t t = 1; t <= T; ++t) {
        auto prev = r.log_alpha.row(t - 1);
        auto cur = r.log_alpha.row(t);
        for (int e = 0; e < trellis.num_edges(); ++e) {
            const Edge& ed = trellis.edges[e];
            const double v = prev[ed.from] + log_gamma(t - 1, e);
            if (v != kNegInf) cur[ed.to] = log_add(cur[ed.to], v);
        }
        m = max_value(cur);
        if (m == kNegInf)
            throw InferenceError("forward recursion lost all probability mass", t);
        for (int s = 0; s < S; ++s) cur[s] -= m;
        r.scale[t] = m;
    }

    r.log_evidence =
        std::accumulate(r.scale.begin(), r.scale.end(), 0.0) + log_sum(r.log_alpha.row(T));
    return r;
}

struct BackwardResult {
    Table log_beta;  // (T+1) x S; row t conditions on observations after t
    std::vector<double> scale;
};

// terminal_log, when provided, replaces the default uniform (all-zero) row T;
// the decoder passes a one-hot row for terminated frames.
inline BackwardResult backward(const Table& log_gamma, const TrellisSpec& trellis,
                               std::span<const double> terminal_log = {}) {
    if (log_gamma.cols() != static_cast<std::size_t>(trellis.num_edges()))
        throw std::invalid_argument("log_gamma column count does not match trellis edges");
    const std::size_t T = log_gamma.rows();
    const int S = trellis.num_states;

    BackwardResult r;
    r.log_beta = Table(T + 1, S, 0.0);
    r.scale.assign(T + 1, 0.0);

    if (!terminal_log.empty()) {
        if (terminal_log.size() != static_cast<std::size_t>(S))
            throw std::invalid_argument("terminal distribution size mismatch");
        for (int s = 0; s < S; ++s) r.log_beta(T, s) = terminal_log[s];
    }
    double m = max_value(r.log_beta.row(T));
    if (m == kNegInf) throw InferenceError("terminal condition carries no mass", T);
    for (int s = 0; s < S; ++s) r.log_beta(T, s) -= m;
    r.scale[T] = m;

    for (std::size_t t = T; t >= 1; --t) {
        auto next = r.log_beta.row(t);
        auto cur = r.log_beta.row(t - 1);
        for (int s = 0; s < S; ++s) cur[s] = kNegInf;
        for (int e = 0; e < trellis.num_edges(); ++e) {
            const Edge& ed = trellis.edges[e];
            const double v = log_gamma(t - 1, e) + next[ed.to];
            if (v != kNegInf) cur[ed.from] = log_add(cur[ed.from], v);
        }
        m = max_value(cur);
        if (m == kNegInf)
            throw InferenceError("backward recursion lost all probability mass", t);
        for (int s = 0; s < S; ++s) cur[s] -= m;
        r.scale[t - 1] = m;
    }
    return r;
}

// posterior(t, e) proportional to alpha_{t-1}(from) * gamma_t(e) * beta_t(to),
// each row normalized so its linear-domain sum is 1 (log-sum 0).
inline Table edge_posteriors(const Table& log_alpha, const Table& log_beta,
                             const Table& log_gamma, const TrellisSpec& trellis) {
    const std::size_t T = log_gamma.rows();
    const int E = trellis.num_edges();
    if (log_alpha.rows() != T + 1 || log_beta.rows() != T + 1 ||
        log_alpha.cols() != static_cast<std::size_t>(trellis.num_states) ||
        log_beta.cols() != static_cast<std::size_t>(trellis.num_states) ||
        log_gamma.cols() != static_cast<std::size_t>(E))
        throw std::invalid_argument("edge_posteriors shape mismatch");

    Table post(T, E, kNegInf);
    for (std::size_t t = 0; t < T; ++t) {
        auto row = post.row(t);
        for (int e = 0; e < E; ++e) {
            const Edge& ed = trellis.edges[e];
            row[e] = log_alpha(t, ed.from) + log_gamma(t, e) + log_beta(t + 1, ed.to);
        }
        const double z = log_sum(row);
        if (z == kNegInf)
            throw InferenceError("observation impossible under the model", t + 1);
        for (int e = 0; e < E; ++e) row[e] -= z;
    }
    return post;
}

// Full forward-backward pass bundled for callers that need everything.
struct SoftSequence {
    Table log_alpha;
    Table log_beta;
    Table log_edge_posterior;
    std::vector<double> alpha_scale;
    std::vector<double> beta_scale;
    double log_evidence = 0.0;
};

inline SoftSequence infer(const Table& log_gamma, const TrellisSpec& trellis,
                          std::span<const double> terminal_log = {}) {
    ForwardResult f = forward(log_gamma, trellis);
    BackwardResult b = backward(log_gamma, trellis, terminal_log);
    Table post = edge_posteriors(f.log_alpha, b.log_beta, log_gamma, trellis);
    return {std::move(f.log_alpha), std::move(b.log_beta), std::move(post),
            std::move(f.scale),     std::move(b.scale),    f.log_evidence};
}

// Linear-domain state posteriors p(s_t | y), t = 1..T, from normalized
// log edge posteriors (marginalize over incoming edges).
inline Table state_posteriors(const Table& log_edge_posterior, const TrellisSpec& trellis) {
    Table out(log_edge_posterior.rows(), trellis.num_states, 0.0);
    for (std::size_t t = 0; t < log_edge_posterior.rows(); ++t)
        for (int e = 0; e < trellis.num_edges(); ++e)
            out(t, trellis.edges[e].to) += std::exp(log_edge_posterior(t, e));
    return out;
}

// Linear-domain per-time symbol table: edge posteriors summed over the edge
// subset driven by each input symbol.
inline Table symbol_joint(const Table& log_edge_posterior, const TrellisSpec& trellis) {
    Table out(log_edge_posterior.rows(), trellis.num_inputs, 0.0);
    for (std::size_t t = 0; t < log_edge_posterior.rows(); ++t)
        for (int e = 0; e < trellis.num_edges(); ++e)
            out(t, trellis.edges[e].input) += std::exp(log_edge_posterior(t, e));
    return out;
}

// Element-wise joint / prior with the prior floored at kProbFloor, each row
// renormalized. Clamp events are counted when a sink is provided.
inline Table extrinsic_divide(const Table& joint, const Table& prior,
                              long* clamp_events = nullptr) {
    if (joint.rows() != prior.rows() || joint.cols() != prior.cols())
        throw std::invalid_argument("extrinsic_divide shape mismatch");
    Table out(joint.rows(), joint.cols());
    for (std::size_t t = 0; t < joint.rows(); ++t) {
        double sum = 0.0;
        for (std::size_t x = 0; x < joint.cols(); ++x) {
            double p = prior(t, x);
            if (p < kProbFloor) {
                p = kProbFloor;
                if (clamp_events) ++*clamp_events;
            }
            out(t, x) = joint(t, x) / p;
            sum += out(t, x);
        }
        if (!(sum > 0.0))
            throw InferenceError("extrinsic row has no mass", t + 1);
        for (std::size_t x = 0; x < joint.cols(); ++x) out(t, x) /= sum;
    }
    return out;
}

}  // namespace bcjr
}  // namespace turbobw
