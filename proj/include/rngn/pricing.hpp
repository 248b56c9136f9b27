#pragma once

// Monte Carlo prices as discounted sample averages of the payoff.

#include <span>
#include <vector>

#include "rngn/data_io.hpp"
#include "rngn/models.hpp"
#include "rngn/sampling.hpp"

namespace rngn {

struct PriceRequest {
    OptionSide side = OptionSide::call;
    double spot = 0.0;
    double strike = 0.0;
    double tau = 0.0;
    double rate = 0.0;

    /// Throws std::invalid_argument unless spot, strike > 0 and tau >= 0.
    void validate() const;
};

struct PriceEstimate {
    double price = 0.0;
    double std_error = 0.0;
};

/// Discounted mean payoff over precomputed log-returns. tau == 0 returns the
/// intrinsic value exactly. Throws NumericalError on a non-finite X.
PriceEstimate price_from_log_returns(std::span<const double> x, const PriceRequest& req);

double price(const Model& model, const PriceRequest& req, const NormalSampleSet& samples);
PriceEstimate price_with_error(const Model& model, const PriceRequest& req,
                               const NormalSampleSet& samples);

/// One price per quote, in quote order. Log-returns are generated once per
/// distinct maturity and discounted with chain.rate_at(tau).
std::vector<double> price_chain(const Model& model, const OptionChain& chain,
                                const NormalSampleSet& samples);

} // namespace rngn
