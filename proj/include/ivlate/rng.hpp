#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ivlate {

/// SplitMix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream `index` of the master seed, with distribution code written out
/// so that draws are identical across standard libraries.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t index) : engine_(mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t bits() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, n), unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = engine_();
            const unsigned __int128 m = static_cast<unsigned __int128>(r) * n;
            if (static_cast<std::uint64_t>(m) >= limit) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal by Box-Muller; caches the second variate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ivlate
