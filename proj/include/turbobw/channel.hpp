#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "turbobw/rng.hpp"
#include "turbobw/trellis.hpp"

namespace turbobw {

// Linear ISI channel with AWGN. Taps are rescaled to unit energy at
// construction so SNR is defined against unit symbol power.
struct ChannelSpec {
    std::vector<double> taps;
    double noise_variance = 1.0;
    std::uint64_t rng_seed = 0;

    ChannelSpec(std::vector<double> taps_in, double noise_variance_in, std::uint64_t seed)
        : taps(std::move(taps_in)), noise_variance(noise_variance_in), rng_seed(seed) {
        if (taps.empty()) throw std::invalid_argument("channel taps must be non-empty");
        if (!(noise_variance > 0.0))
            throw std::invalid_argument("noise variance must be positive");
        double energy = 0.0;
        for (double h : taps) energy += h * h;
        if (!(energy > 0.0)) throw std::invalid_argument("channel taps carry no energy");
        const double s = 1.0 / std::sqrt(energy);
        for (double& h : taps) h *= s;
    }

    int memory() const { return static_cast<int>(taps.size()); }
};

struct ChannelOutput {
    std::vector<double> noiseless;  // z_t
    std::vector<double> received;   // y_t = z_t + w_t
};

// y_t = sum_l h_l x_{t-l+1} + w_t. Pre-frame symbols are +1 (known ramp-up);
// noise is seeded per ChannelSpec.
inline ChannelOutput apply_channel(std::span<const double> symbols, const ChannelSpec& spec) {
    if (symbols.empty()) throw std::invalid_argument("empty symbol sequence");
    const std::size_t T = symbols.size();
    const int L = spec.memory();
    ChannelOutput out;
    out.noiseless.resize(T);
    out.received.resize(T);
    Rng rng(spec.rng_seed);
    const double sigma = std::sqrt(spec.noise_variance);
    for (std::size_t t = 0; t < T; ++t) {
        double z = 0.0;
        for (int l = 0; l < L; ++l) {
            const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(t) - l;
            z += spec.taps[l] * (i >= 0 ? symbols[i] : +1.0);
        }
        out.noiseless[t] = z;
        out.received[t] = z + sigma * rng.next_gaussian();
    }
    return out;
}

// Noiseless channel output for each trellis param: z_l over the L-symbol
// tuple encoded by param l (digit i of l is the symbol i steps back).
inline std::vector<double> true_param_table(const ChannelSpec& spec, const TrellisSpec& trellis) {
    const int L = spec.memory();
    if (trellis.num_params != (1 << L))
        throw std::invalid_argument("trellis params do not match channel memory");
    std::vector<double> table(trellis.num_params);
    for (int l = 0; l < trellis.num_params; ++l) {
        double z = 0.0;
        for (int i = 0; i < L; ++i) z += spec.taps[i] * (((l >> i) & 1) ? -1.0 : +1.0);
        table[l] = z;
    }
    return table;
}

// sigma_w^2 for a given SNR in dB, with unit symbol energy and unit-norm taps.
inline double snr_to_variance(double snr_db) {
    if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite");
    return std::pow(10.0, -snr_db / 10.0);
}

}  // namespace turbobw
