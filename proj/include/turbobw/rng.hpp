#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <random>

namespace turbobw {

// SplitMix64 output function.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stream `stream` derived from a master seed. Used to fan one experiment
// seed out into per-frame bit/noise/initializer streams that never share
// state: seed_k = splitmix64(master + (k + 1) * 0x9E3779B97F4A7C15).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master + (stream + 1) * 0x9E3779B97F4A7C15ull);
}

// mt19937_64 with hand-rolled output transforms. The engine sequence is
// fixed by the standard; avoiding std::*_distribution keeps every draw
// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    int next_bit() { return static_cast<int>(engine_() >> 63); }

    // unbiased uniform in [0, bound)
    std::uint64_t next_below(std::uint64_t bound) {
        assert(bound > 0);
        const std::uint64_t min = (0 - bound) % bound;
        std::uint64_t x = engine_();
        while (x < min) x = engine_();
        return x % bound;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // standard normal via Box-Muller; the second draw is cached
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace turbobw
