#pragma once

#include <cstdint>

namespace cvarlq {

/// splitmix64 finalizer. Published constants; test vectors live in
/// tests/test_mc.cpp so other implementations can reproduce the streams.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

/// Counter-based generator: the splitmix64 sequence. Small state, splittable
/// by construction, identical output on every platform.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    /// Uniform draw in the open interval (0, 1): (x >> 11) + 0.5 scaled by
    /// 2^-53, so the inverse normal CDF never sees 0 or 1.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via the inverse-CDF method (stream-aligned: exactly
    /// one uniform per draw).
    double next_normal();

private:
    std::uint64_t state_;
};

/// Inverse standard normal CDF: Acklam's rational approximation followed by
/// one Halley refinement, absolute error below 1e-13 on (0, 1).
double normal_icdf(double p);

} // namespace cvarlq
