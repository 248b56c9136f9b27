#pragma once

// Option-chain ingestion: CSV parsing, preprocessing filters, rate curve
// interpolation and the train/test/extreme-moneyness split.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rngn {

enum class OptionSide { call, put };

std::string_view to_string(OptionSide side) noexcept;
/// Accepts call/put, C/P, case-insensitive. Throws DataError.
OptionSide parse_side(std::string_view text);

struct OptionQuote {
    OptionSide side = OptionSide::call;
    double strike = 0.0;
    double days = 0.0;  ///< days to maturity; may be fractional
    double tau = 0.0;   ///< days / 365
    double bid = 0.0;
    double ask = 0.0;
    double mid = 0.0;   ///< (bid + ask) / 2
    double weight = 1.0;

    bool operator==(const OptionQuote&) const = default;
};

/// Builds a quote from its raw fields, deriving tau and mid.
OptionQuote make_quote(OptionSide side, double strike, double days, double bid, double ask);

struct RatePoint {
    double tenor_days = 0.0;
    double rate = 0.0;

    bool operator==(const RatePoint&) const = default;
};

struct OptionChain {
    std::string observation_date;
    double spot = 0.0;
    std::vector<OptionQuote> quotes;
    std::vector<RatePoint> rate_curve;  ///< tenors strictly increasing

    double rate_at(double tau) const;
    /// Distinct maturities (tau) in ascending order.
    std::vector<double> maturities() const;
    /// Distinct strikes in ascending order.
    std::vector<double> strikes() const;
    std::vector<double> mid_prices() const;

    bool operator==(const OptionChain&) const = default;
};

/// Piecewise-linear in tenor (days = tau * 365), flat beyond the end points.
/// Throws std::invalid_argument on an empty curve.
double interpolate_rate(const std::vector<RatePoint>& curve, double tau);

struct LoadOptions {
    std::optional<double> spot;                          ///< overrides a #spot= line
    std::optional<std::filesystem::path> rates_path;     ///< tenor_days,rate CSV
    std::optional<double> flat_rate;                     ///< used when no rates file
    double min_price = 0.025;
};

struct LoadReport {
    std::size_t rows = 0;
    std::size_t dropped_low_price = 0;
    std::size_t dropped_crossed = 0;   ///< ask < bid
    std::size_t dropped_sanity = 0;    ///< mid >= spot (call) or mid >= strike (put)
};

/// Parses a chain CSV with header date,side,strike,days,bid,ask. The spot comes
/// from LoadOptions::spot or a "#spot=<value>" comment line. Quotes with a bid
/// or ask below min_price are dropped. Throws DataError on malformed input or
/// when no quote survives filtering.
OptionChain load_chain(const std::filesystem::path& path, const LoadOptions& options = {},
                       LoadReport* report = nullptr);
OptionChain parse_chain(std::string_view text, const LoadOptions& options = {},
                        LoadReport* report = nullptr);

/// Parses a tenor_days,rate CSV.
std::vector<RatePoint> parse_rates(std::string_view text);
std::vector<RatePoint> load_rates(const std::filesystem::path& path);

/// Chain CSV including the #spot line; numbers use 17 significant digits.
std::string format_chain(const OptionChain& chain);
std::string format_rates(const std::vector<RatePoint>& curve);
void write_chain(const OptionChain& chain, const std::filesystem::path& chain_path,
                 const std::optional<std::filesystem::path>& rates_path = std::nullopt);

struct SplitChains {
    OptionChain train;
    OptionChain test;
    OptionChain extreme;
};

/// Within each (maturity, side) group, quotes with K / S in [0.8, 1.2] are
/// ordered by strike and numbered from 1: odd numbers train, even numbers test.
/// Quotes outside the band form the extreme set.
SplitChains split_train_test(const OptionChain& chain);

/// Copy of chain with only the given quotes.
OptionChain with_quotes(const OptionChain& chain, std::vector<OptionQuote> quotes);

} // namespace rngn
