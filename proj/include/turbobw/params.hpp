#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "turbobw/table.hpp"
#include "turbobw/trellis.hpp"

namespace turbobw {

// Variances are never allowed below this (signal power is normalized to 1).
inline constexpr double kVarianceFloor = 1e-6;

// Per-param Gaussian emission parameters phi_l = (mean_l, variance_l).
struct EdgeGaussianTable {
    std::vector<double> means;
    std::vector<double> variances;

    bool operator==(const EdgeGaussianTable&) const = default;

    void validate(int num_params) const {
        if (static_cast<int>(means.size()) != num_params ||
            static_cast<int>(variances.size()) != num_params)
            throw std::invalid_argument("emission table size does not match trellis params");
        for (double v : variances)
            if (!(v > 0.0))
                throw std::invalid_argument("emission variances must be strictly positive");
    }
};

// Read-only view bundling everything one inference pass needs. Assembled
// inline at call sites; does not own the referenced objects.
struct HmmParams {
    const TrellisSpec& trellis;
    const EdgeGaussianTable& emissions;
    const Table& symbol_priors;  // T x num_inputs, rows sum to 1
};

inline Table uniform_priors(std::size_t length, int alphabet_size = 2) {
    return Table(length, alphabet_size, 1.0 / alphabet_size);
}

inline void validate_prior_rows(const Table& priors, double tol = 1e-12) {
    for (std::size_t t = 0; t < priors.rows(); ++t) {
        double sum = 0.0;
        for (std::size_t x = 0; x < priors.cols(); ++x) {
            const double p = priors(t, x);
            if (p < 0.0) throw std::invalid_argument("symbol prior has negative mass");
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol)
            throw std::invalid_argument("symbol prior rows must sum to 1");
    }
}

}  // namespace turbobw
