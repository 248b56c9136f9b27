#pragma once

// Heston stochastic-volatility model as a ground-truth generator: Fourier
// pricing, an Euler Monte Carlo oracle, the true density and log-return
// cumulants, and the simulated option chains.

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rngn/data_io.hpp"
#include "rngn/density.hpp"
#include "rngn/pricing.hpp"

namespace rngn {

struct HestonParams {
    double nu0 = 0.05;
    double vartheta = 0.25;
    double kappa = 0.15;
    double xi = 0.35;
    double rho = -0.9;

    /// Throws std::invalid_argument.
    void validate() const;
    /// 2 kappa vartheta >= xi^2.
    bool feller() const noexcept;
};

using Complex = std::complex<double>;

/// ln E[exp(iu X)] for the log-return X = ln(S_T / S_t), in a form that stays
/// on the principal branch for long maturities and is stable as xi -> 0.
Complex heston_log_cf(const HestonParams& p, Complex u, double tau, double rate);

/// E[exp(iu ln S_T)]. Throws std::invalid_argument for tau <= 0.
Complex heston_cf(const HestonParams& p, Complex u, double tau, double spot, double rate);

/// Damped Fourier price (damping 1.5, adaptive Gauss-Legendre, truncation tail
/// below 1e-10). Puts by parity. Throws NumericalError if the quadrature does
/// not converge.
double heston_price(const HestonParams& p, OptionSide side, double spot, double strike, double tau,
                    double rate);

/// Terminal log-returns ln(S_T / S_t) from an Euler full-truncation scheme
/// (log-Euler for the price). Path i uses its own counter stream.
std::vector<double> heston_mc_log_returns(const HestonParams& p, double tau, double rate,
                                          std::size_t paths, std::size_t steps, std::uint64_t seed);

PriceEstimate heston_mc_price(const HestonParams& p, OptionSide side, double spot, double strike,
                              double tau, double rate, std::size_t paths, std::size_t steps,
                              std::uint64_t seed);

/// Terminal-price density e^{r tau} d^2C/dK^2 by central differences on the
/// grid, clipped at 0. Throws NumericalError when the clipped negative mass
/// exceeds 1e-4.
DensityEstimate heston_rnd(const HestonParams& p, double spot, double tau, double rate,
                           std::span<const double> strikes);

struct HestonMoments {
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  ///< non-excess
};

/// Log-return moments from the first four cumulants, read off the Taylor
/// coefficients of the cumulant generating function by a Cauchy integral.
/// Throws NumericalError when two contour radii disagree.
HestonMoments heston_true_moments(const HestonParams& p, double tau, double rate);

struct HestonScenario {
    std::string name;
    HestonParams params;
    double spot = 1000.0;
    double rate = 0.04;
    std::vector<double> taus{0.25};
    std::vector<double> strikes;  ///< 400..1600 step 20 by default
};

/// left-skew, likely-normal, right-skew or long-maturity. Throws DataError.
HestonScenario heston_scenario(std::string_view name);
const std::vector<std::string>& heston_scenario_names();

std::vector<double> default_strike_grid();

/// Calls at every (tau, strike) of the scenario priced by heston_price; bid =
/// ask = price, dated "simulated", with a flat rate curve.
OptionChain generate_simulated_chain(const HestonScenario& scenario);

} // namespace rngn
