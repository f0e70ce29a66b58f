#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sfdlm {

/// Counter-based pseudo-random generator.
///
/// Every draw is a pure function of (seed, stream, counter), so any stream can be
/// re-created exactly from its coordinates. Streams for sub-tasks (one per
/// training step, per sequence, per reverse step) are derived with fork().
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), key_(mix(mix(seed) ^ mix(stream + kStreamSalt))) {}

    std::uint64_t next_u64() { return mix(key_ + (counter_++) * kGolden); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (cosine branch only, two draws per sample).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Independent child stream; does not advance this generator.
    Rng fork(std::uint64_t substream) const {
        return Rng(seed_, mix(stream_ ^ mix(substream + kForkSalt)));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
    static constexpr std::uint64_t kForkSalt = 0x8CB92BA72F3D8DD7ULL;

    // splitmix64 finalizer
    static constexpr std::uint64_t mix(std::uint64_t z) {
        z += kGolden;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace sfdlm
