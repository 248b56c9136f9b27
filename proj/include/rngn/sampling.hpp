#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rngn {

/// The shared standard-normal draws Z_1..Z_N. Drawn once per run and held
/// fixed, so every price and penalty is a deterministic function of the model
/// parameters.
struct NormalSampleSet {
    std::vector<double> values;
    std::uint64_t seed = 0;
    bool antithetic = false;

    std::size_t size() const noexcept { return values.size(); }
    std::span<const double> view() const noexcept { return values; }
};

/// n i.i.d. N(0,1) draws by Box-Muller over a counter-based uniform stream.
/// The sequence for (n, seed) is a prefix of the sequence for (n + k, seed).
/// With antithetic set, odd entries mirror the preceding even entry.
/// Throws std::invalid_argument when n == 0.
NormalSampleSet draw_standard_normal(std::size_t n, std::uint64_t seed, bool antithetic = false);

/// Fills out[i] with the (offset + i)-th standard normal of the given stream.
void fill_standard_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t offset,
                          std::span<double> out);

} // namespace rngn
