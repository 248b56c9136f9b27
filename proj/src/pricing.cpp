#include "rngn/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "rngn/error.hpp"
#include "rngn/parallel.hpp"

namespace rngn {

void PriceRequest::validate() const {
    if (!(spot > 0.0) || !(strike >= 0.0) || !(tau >= 0.0) || !std::isfinite(rate) ||
        !std::isfinite(spot) || !std::isfinite(strike) || !std::isfinite(tau)) {
        throw std::invalid_argument("price request needs spot > 0, strike >= 0, tau >= 0");
    }
}

PriceEstimate price_from_log_returns(std::span<const double> x, const PriceRequest& req) {
    req.validate();
    if (req.tau == 0.0) {
        const double intrinsic = req.side == OptionSide::call ? std::max(req.spot - req.strike, 0.0)
                                                              : std::max(req.strike - req.spot, 0.0);
        return {intrinsic, 0.0};
    }
    if (x.empty()) throw std::invalid_argument("no log-return samples");
    const double k = req.strike / req.spot;
    const bool call = req.side == OptionSide::call;
    const std::size_t chunks = chunk_count(x.size());
    std::vector<double> sums(chunks), squares(chunks);
    for_each_chunk(chunks, [&](std::size_t c) {
        const std::size_t end = std::min(x.size(), (c + 1) * kSampleChunk);
        CompensatedSum s, s2;
        for (std::size_t n = c * kSampleChunk; n < end; ++n) {
            if (!std::isfinite(x[n])) throw NumericalError("non-finite log-return sample");
            const double e = std::exp(x[n]);
            const double pay = call ? std::max(e - k, 0.0) : std::max(k - e, 0.0);
            s.add(pay);
            s2.add(pay * pay);
        }
        sums[c] = s.value();
        squares[c] = s2.value();
    });
    CompensatedSum total, total2;
    for (std::size_t c = 0; c < chunks; ++c) {
        total.add(sums[c]);
        total2.add(squares[c]);
    }
    const double n = static_cast<double>(x.size());
    const double mean = total.value() / n;
    const double var = n > 1.0 ? std::max(total2.value() / n - mean * mean, 0.0) * n / (n - 1.0) : 0.0;
    const double scale = std::exp(-req.rate * req.tau) * req.spot;
    return {scale * mean, scale * std::sqrt(var / n)};
}

PriceEstimate price_with_error(const Model& model, const PriceRequest& req,
                               const NormalSampleSet& samples) {
    req.validate();
    if (req.tau == 0.0) return price_from_log_returns({}, req);
    const auto x = sample_log_returns(model, req.tau, req.rate, samples);
    return price_from_log_returns(x, req);
}

double price(const Model& model, const PriceRequest& req, const NormalSampleSet& samples) {
    return price_with_error(model, req, samples).price;
}

std::vector<double> price_chain(const Model& model, const OptionChain& chain,
                                const NormalSampleSet& samples) {
    std::map<double, std::vector<std::size_t>> by_tau;
    for (std::size_t i = 0; i < chain.quotes.size(); ++i) by_tau[chain.quotes[i].tau].push_back(i);
    std::vector<double> out(chain.quotes.size());
    for (const auto& [tau, idx] : by_tau) {
        const double r = chain.rate_at(tau);
        const auto x = tau > 0.0 ? sample_log_returns(model, tau, r, samples) : std::vector<double>{};
        for (std::size_t i : idx) {
            const auto& q = chain.quotes[i];
            out[i] = price_from_log_returns(x, {q.side, chain.spot, q.strike, tau, r}).price;
        }
    }
    return out;
}

} // namespace rngn
