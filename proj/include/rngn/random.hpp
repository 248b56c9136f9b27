#pragma once

#include <cstdint>

namespace rngn {

/// Stateless counter-based generator: the n-th draw of a stream depends only on
/// (seed, stream, n), so sequences are reproducible on every platform and any
/// prefix of a longer sequence equals the shorter sequence.
class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

    constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix(key_ + (counter + 1) * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform on (0, 1], 53 bits of resolution.
    constexpr double uniform_open0(std::uint64_t counter) const noexcept {
        return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform on [0, 1).
    constexpr double uniform(std::uint64_t counter) const noexcept {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    // SplitMix64 finalizer.
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
};

} // namespace rngn
