#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace rngn {

/// Samples are always processed in chunks of this size. Every reduction over
/// samples sums within a chunk first and then combines the chunk partials in
/// chunk order, so results do not depend on the thread count.
inline constexpr std::size_t kSampleChunk = 8192;

/// Number of worker threads used by the library (>= 1).
unsigned thread_count() noexcept;

/// Sets the worker count; 0 selects the hardware concurrency.
void set_thread_count(unsigned n) noexcept;

inline std::size_t chunk_count(std::size_t n) noexcept {
    return (n + kSampleChunk - 1) / kSampleChunk;
}

/// Runs fn(chunk_index) for every chunk index in [0, chunks). Chunks are
/// distributed over thread_count() threads; fn must only write to state owned
/// by its chunk.
void for_each_chunk(std::size_t chunks, const std::function<void(std::size_t)>& fn);

/// Neumaier-compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if ((sum_ >= 0 ? sum_ : -sum_) >= (x >= 0 ? x : -x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// K running sums over [0, count): body(begin, end, acc) adds the terms of one
/// chunk into acc. Chunk partials are combined in chunk order.
template <std::size_t K, class Body>
std::array<double, K> chunked_sums(std::size_t count, Body body) {
    const std::size_t chunks = chunk_count(count);
    std::vector<std::array<double, K>> partial(chunks);
    for_each_chunk(chunks, [&](std::size_t c) {
        partial[c].fill(0.0);
        body(c * kSampleChunk, std::min(count, (c + 1) * kSampleChunk), partial[c]);
    });
    std::array<CompensatedSum, K> total{};
    for (const auto& p : partial) {
        for (std::size_t k = 0; k < K; ++k) total[k].add(p[k]);
    }
    std::array<double, K> out{};
    for (std::size_t k = 0; k < K; ++k) out[k] = total[k].value();
    return out;
}

} // namespace rngn
