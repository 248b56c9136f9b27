#pragma once

// Price-perturbation stability study: re-calibrate on tick-shifted prices and
// measure the spread of the recovered density characteristics.

#include <cstdint>
#include <string>
#include <vector>

#include "rngn/calibration.hpp"
#include "rngn/density.hpp"

namespace rngn {

struct PerturbationOptions {
    std::size_t trials = 50;
    double tick = 0.25;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless trials >= 2 and tick >= 0.
    void validate() const;
};

/// Shifts bid, ask and mid of every quote by +tick or -tick with equal
/// probability. The signs depend only on (seed, trial, quote index).
OptionChain perturb_chain(const OptionChain& chain, double tick, std::uint64_t seed,
                          std::uint64_t trial);

struct TrialOutcome {
    bool diverged = false;
    std::string error;
    RndCharacteristics rnd;  ///< of the terminal price S e^X
    double train_mse = 0.0;
};

struct StabilityReport {
    double tau = 0.0;  ///< maturity at which the density is characterized
    std::vector<TrialOutcome> trials;
    /// Sample standard deviation over the trials that did not diverge, one per
    /// stability_columns() entry; NaN when fewer than two trials survive.
    std::vector<double> std_dev;
    std::size_t used = 0;
};

/// The ten characteristics followed by train_mse.
const std::vector<std::string>& stability_columns();

/// Calibrates once per trial from the same initial model and sample set. The
/// density is read at the shortest maturity of the chain. Diverging trials are
/// flagged and left out of std_dev.
StabilityReport perturbation_study(ModelKind kind, const OptionChain& train,
                                   const CalibrationConfig& config,
                                   const PerturbationOptions& options);

/// One row per trial (trial, diverged, columns...) and a final "std" row.
std::string format_stability_csv(const StabilityReport& report);

} // namespace rngn
