#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>

namespace turbobw {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Floor applied to linear-domain probabilities before they appear in a
// denominator. log(1e-30) ~ -69.
inline constexpr double kProbFloor = 1e-30;

// log(exp(a) + exp(b)) without leaving the log domain.
inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == kNegInf) return a;  // also covers a == b == -inf
    const double d = b - a;
    if (d < -37.0) return a;  // exp(d) below double resolution
    return a + std::log1p(std::exp(d));
}

inline double log_sum(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

inline double max_value(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    return m;
}

}  // namespace turbobw
