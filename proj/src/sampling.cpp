#include "rngn/sampling.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rngn/random.hpp"

namespace rngn {

void fill_standard_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t offset,
                          std::span<double> out) {
    const CounterRng rng(seed, stream);
    std::size_t i = 0;
    // Box-Muller pair p produces normals 2p (cosine branch) and 2p + 1 (sine branch).
    while (i < out.size()) {
        const std::uint64_t index = offset + i;
        const std::uint64_t pair = index / 2;
        const double radius = std::sqrt(-2.0 * std::log(rng.uniform_open0(2 * pair)));
        const double angle = 2.0 * std::numbers::pi * rng.uniform(2 * pair + 1);
        if (index % 2 == 0) {
            out[i++] = radius * std::cos(angle);
            if (i < out.size()) out[i++] = radius * std::sin(angle);
        } else {
            out[i++] = radius * std::sin(angle);
        }
    }
}

NormalSampleSet draw_standard_normal(std::size_t n, std::uint64_t seed, bool antithetic) {
    if (n == 0) throw std::invalid_argument("draw_standard_normal needs n >= 1");
    NormalSampleSet set;
    set.seed = seed;
    set.antithetic = antithetic;
    set.values.resize(n);
    if (!antithetic) {
        fill_standard_normal(seed, 0, 0, set.values);
        return set;
    }
    std::vector<double> base((n + 1) / 2);
    fill_standard_normal(seed, 0, 0, base);
    for (std::size_t i = 0; i < n; ++i) {
        set.values[i] = (i % 2 == 0) ? base[i / 2] : -base[i / 2];
    }
    return set;
}

} // namespace rngn
