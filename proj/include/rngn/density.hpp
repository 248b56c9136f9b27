#pragma once

// Risk-neutral densities and summary statistics from model samples.

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rngn/models.hpp"
#include "rngn/sampling.hpp"

namespace rngn {

enum class DensityVariable { log_return, terminal_price };

struct DensityEstimate {
    std::vector<double> grid;
    std::vector<double> values;
    DensityVariable variable = DensityVariable::log_return;
    double bandwidth = 0.0;  ///< 0 unless estimated by KDE

    /// Trapezoidal integral over the grid.
    double integral() const;
};

/// KDE subsample cap: every ceil(N / cap)-th sample is used.
inline constexpr std::size_t kDefaultKdePoints = 1'000'000;

/// Gaussian KDE with Silverman bandwidth 1.06 sd m^(-1/5). Throws
/// NumericalError for a zero-variance sample.
DensityEstimate kde(std::span<const double> samples, std::span<const double> grid,
                    std::size_t max_points = kDefaultKdePoints);

DensityEstimate kde_log_return(const Model& model, double tau, double rate,
                               const NormalSampleSet& samples, std::span<const double> grid,
                               std::size_t max_points = kDefaultKdePoints);

/// f(s) = q(x) / s at s = spot e^x for every grid point of a log-return density.
DensityEstimate price_density(const DensityEstimate& log_return_density, double spot);

/// Evenly spaced grid covering mean +- width * sd of the samples.
std::vector<double> sample_grid(std::span<const double> samples, double width = 8.0,
                                std::size_t points = 401);

struct SampleMoments {
    double mean = 0.0;
    double std = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  ///< non-excess
};

/// Population moments (1/n normalization). Throws NumericalError on zero
/// variance and std::invalid_argument on empty input.
SampleMoments sample_moments(std::span<const double> values);

/// Linear interpolation of order statistics at plotting positions
/// (k - 1/3) / (n + 1/3).
double quantile_sorted(std::span<const double> sorted, double p);

struct RndCharacteristics {
    double mean = 0.0;
    double std = 0.0;
    double skewness = 0.0;
    double skew_pm = 0.0;  ///< (mean - median) / std
    double skew_am = 0.0;  ///< (q75 - q50) / (q50 - q25)
    double kurtosis = 0.0;
    double x01 = 0.0;
    double x05 = 0.0;
    double x95 = 0.0;
    double x99 = 0.0;
};

/// Throws std::invalid_argument for fewer than 100 values.
RndCharacteristics characteristics(std::span<const double> values);

/// Column names in RndCharacteristics order.
const std::vector<std::string>& characteristic_names();
std::vector<double> characteristic_values(const RndCharacteristics& c);

struct RiskNeutralMoments {
    double rnm2 = 0.0;  ///< std of the log-return
    double rnm3 = 0.0;  ///< skewness
    double rnm4 = 0.0;  ///< kurtosis
};

RiskNeutralMoments risk_neutral_moments(const Model& model, double tau, double rate,
                                        const NormalSampleSet& samples);

struct TermStructureRow {
    double tau = 0.0;
    RiskNeutralMoments moments;
};

std::vector<TermStructureRow> term_structure(const Model& model, std::span<const double> taus,
                                             const std::function<double(double)>& rate_fn,
                                             const NormalSampleSet& samples);

/// "1w", "3m", "1y", "30d" or a bare year fraction. Throws std::invalid_argument.
double parse_tau_label(std::string_view label);
std::vector<double> parse_tau_list(std::string_view list);

std::string format_density_csv(const DensityEstimate& est);
std::string format_term_structure_csv(const std::vector<TermStructureRow>& rows);

} // namespace rngn
