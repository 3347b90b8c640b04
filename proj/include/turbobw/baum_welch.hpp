#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "turbobw/bcjr.hpp"
#include "turbobw/params.hpp"
#include "turbobw/rng.hpp"
#include "turbobw/table.hpp"
#include "turbobw/trellis.hpp"

namespace turbobw {

enum class VarianceMode {
    kFixedTrue,  // variances pinned to their initial (true) value
    kEstimated,  // variances re-estimated each M step
};

// A parameter update is skipped when its total responsibility over the
// frame falls below this fraction of T.
inline constexpr double kOccupancyFloorScale = 1e-8;

// Initializer for the emission table: means start at the reference noiseless
// outputs plus a seeded uniform perturbation in [-perturbation, +perturbation].
struct InitSpec {
    std::vector<double> true_means;
    double perturbation = 0.2;
    VarianceMode variance_mode = VarianceMode::kFixedTrue;
    double variance = 1.0;  // initial value; also the fixed value in kFixedTrue mode
    std::uint64_t rng_seed = 0;
};

inline EdgeGaussianTable make_initial_emissions(const InitSpec& init, int num_params) {
    if (init.perturbation < 0.0)
        throw std::invalid_argument("perturbation magnitude must be nonnegative");
    if (static_cast<int>(init.true_means.size()) != num_params)
        throw std::invalid_argument("true_means size does not match trellis params");
    Rng rng(init.rng_seed);
    EdgeGaussianTable em;
    em.means.resize(num_params);
    for (int l = 0; l < num_params; ++l)
        em.means[l] = init.true_means[l] + rng.next_uniform(-init.perturbation, init.perturbation);
    em.variances.assign(num_params, std::max(init.variance, kVarianceFloor));
    return em;
}

namespace bw {

struct EStepResult {
    Table responsibilities;  // T x num_params
    double log_evidence = 0.0;
};

// E step: BCJR posteriors folded onto param indices. On the conventional
// trellis this reproduces state posteriors; on the reduced trellis the edge
// posteriors come through unchanged.
inline EStepResult e_step(std::span<const double> observations, const HmmParams& params) {
    const Table gamma = bcjr::branch_metrics(observations, params);
    const bcjr::SoftSequence soft = bcjr::infer(gamma, params.trellis);
    const TrellisSpec& tr = params.trellis;
    Table resp(observations.size(), tr.num_params, 0.0);
    for (std::size_t t = 0; t < observations.size(); ++t)
        for (int e = 0; e < tr.num_edges(); ++e)
            resp(t, tr.edges[e].param) += std::exp(soft.log_edge_posterior(t, e));
    return {std::move(resp), soft.log_evidence};
}

struct MStepStats {
    long skipped = 0;  // params left unchanged for lack of occupancy
};

inline std::vector<double> m_step_means(std::span<const double> observations, const Table& resp,
                                        const std::vector<double>& current_means,
                                        MStepStats* stats = nullptr) {
    const std::size_t T = observations.size();
    if (resp.rows() != T || resp.cols() != current_means.size())
        throw std::invalid_argument("responsibility table shape mismatch");
    const double floor = kOccupancyFloorScale * static_cast<double>(T);
    std::vector<double> means = current_means;
    for (std::size_t l = 0; l < means.size(); ++l) {
        double num = 0.0, den = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            num += resp(t, l) * observations[t];
            den += resp(t, l);
        }
        if (den < floor) {
            if (stats) ++stats->skipped;
            continue;
        }
        means[l] = num / den;
    }
    return means;
}

inline std::vector<double> m_step_variances(std::span<const double> observations,
                                            const Table& resp,
                                            const std::vector<double>& updated_means,
                                            const std::vector<double>& current_variances,
                                            MStepStats* stats = nullptr) {
    const std::size_t T = observations.size();
    if (resp.rows() != T || resp.cols() != updated_means.size() ||
        updated_means.size() != current_variances.size())
        throw std::invalid_argument("responsibility table shape mismatch");
    const double floor = kOccupancyFloorScale * static_cast<double>(T);
    std::vector<double> variances = current_variances;
    for (std::size_t l = 0; l < variances.size(); ++l) {
        double num = 0.0, den = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double d = observations[t] - updated_means[l];
            num += resp(t, l) * d * d;
            den += resp(t, l);
        }
        if (den < floor) {
            if (stats) ++stats->skipped;
            continue;
        }
        variances[l] = std::max(num / den, kVarianceFloor);
    }
    return variances;
}

// Mean squared error between estimated means and the true noiseless channel
// outputs, averaged over params.
inline double channel_mse(std::span<const double> estimated_means,
                          std::span<const double> true_outputs) {
    if (estimated_means.size() != true_outputs.size())
        throw std::invalid_argument("channel_mse length mismatch");
    double acc = 0.0;
    for (std::size_t l = 0; l < estimated_means.size(); ++l) {
        const double d = estimated_means[l] - true_outputs[l];
        acc += d * d;
    }
    return acc / static_cast<double>(estimated_means.size());
}

struct EmIteration {
    std::vector<double> means;
    std::vector<double> variances;
    // evidence of the parameters that entered the iteration (the E-step
    // quantity, so it is non-decreasing under fixed priors)
    double log_evidence = 0.0;
    double mse = std::numeric_limits<double>::quiet_NaN();  // NaN when truth unknown
    long m_step_skips = 0;
};

struct EmOptions {
    VarianceMode variance_mode = VarianceMode::kFixedTrue;
};

// One E + M pass, updating `emissions` in place.
inline EmIteration em_iterate(std::span<const double> observations, const TrellisSpec& trellis,
                              EdgeGaussianTable& emissions, const Table& priors,
                              const EmOptions& opts,
                              const std::vector<double>* true_means = nullptr) {
    EStepResult es = e_step(observations, {trellis, emissions, priors});
    MStepStats stats;
    emissions.means = m_step_means(observations, es.responsibilities, emissions.means, &stats);
    if (opts.variance_mode == VarianceMode::kEstimated)
        emissions.variances = m_step_variances(observations, es.responsibilities, emissions.means,
                                               emissions.variances, &stats);
    EmIteration it;
    it.means = emissions.means;
    it.variances = emissions.variances;
    it.log_evidence = es.log_evidence;
    it.m_step_skips = stats.skipped;
    if (true_means) it.mse = channel_mse(emissions.means, *true_means);
    return it;
}

struct EmEstimate {
    EdgeGaussianTable emissions;
    std::vector<EmIteration> history;
    int iterations = 0;
};

inline EmEstimate run_em(std::span<const double> observations, const TrellisSpec& trellis,
                         const InitSpec& init, const Table& priors, int n_iters) {
    if (n_iters < 1) throw std::invalid_argument("n_iters must be >= 1");
    EmEstimate est;
    est.emissions = make_initial_emissions(init, trellis.num_params);
    EmOptions opts{init.variance_mode};
    const std::vector<double>* truth = init.true_means.empty() ? nullptr : &init.true_means;
    est.history.reserve(n_iters);
    for (int i = 0; i < n_iters; ++i)
        est.history.push_back(
            em_iterate(observations, trellis, est.emissions, priors, opts, truth));
    est.iterations = n_iters;
    return est;
}

}  // namespace bw
}  // namespace turbobw
