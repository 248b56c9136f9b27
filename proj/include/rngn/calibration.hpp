#pragma once

// Penalized calibration: pricing loss plus lambda times the no-arbitrage
// penalty, minimized by Adam over the unconstrained parameters.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rngn/arbitrage.hpp"
#include "rngn/data_io.hpp"
#include "rngn/models.hpp"
#include "rngn/sampling.hpp"

namespace rngn {

enum class LossKind { absolute, relative };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(std::string_view name);

struct CalibrationConfig {
    double learning_rate = 0.01;
    std::size_t iterations = 5000;
    double lambda = 1.0;
    std::size_t n_samples = 1'000'000;
    std::uint64_t seed = 0;
    LossKind loss_kind = LossKind::absolute;
    double convergence_tol = 1e-10;
    std::size_t convergence_window = 100;
    double relative_mse_floor = 0.05;
    std::size_t hidden = 32;
    bool antithetic = false;

    /// Throws std::invalid_argument.
    void validate() const;
};

struct ErrorMetric {
    double value = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;  ///< quotes below the relative-metric floor
};

/// Calls and puts are averaged separately and the two means summed; a side
/// with no quotes contributes nothing. Throws std::invalid_argument on empty or
/// mismatched input.
ErrorMetric mse(std::span<const double> observed, std::span<const double> fitted,
                std::span<const OptionSide> sides);
/// (fitted / observed - 1)^2, skipping observed prices below floor.
ErrorMetric relative_mse(std::span<const double> observed, std::span<const double> fitted,
                         std::span<const OptionSide> sides, double floor = 0.05);

struct ObjectiveValue {
    double loss = 0.0;      ///< pricing + lambda * penalty
    double pricing = 0.0;
    double penalty = 0.0;   ///< J before lambda
    std::vector<double> gradient;  ///< d loss / d raw parameters (to_raw order)
    std::vector<double> fitted;    ///< model price per quote
};

/// Fixed data of one calibration problem; evaluates the objective and its
/// gradient at any parameter vector of the prototype's shape.
class Objective {
public:
    /// grid may be null (no penalty). RN-Q requires a single maturity and
    /// ignores the grid: its martingale condition holds by construction.
    Objective(Model prototype, OptionChain train, std::optional<SyntheticGrid> grid,
              const CalibrationConfig& config, const NormalSampleSet& samples);

    std::size_t dimension() const noexcept { return dim_; }
    const Model& prototype() const noexcept { return prototype_; }

    /// Model for a raw vector, with RN-Q mu set from the martingale condition.
    Model model_at(std::span<const double> raw) const;

    /// Not safe to call concurrently on one instance: activation buffers are
    /// reused between calls.
    ObjectiveValue evaluate(std::span<const double> raw, bool with_gradient = true) const;

private:
    ObjectiveValue evaluate_rnq(std::span<const double> raw, bool with_gradient) const;
    ObjectiveValue evaluate_mlp(std::span<const double> raw, bool with_gradient) const;

    Model prototype_;
    OptionChain train_;
    std::optional<SyntheticGrid> grid_;
    CalibrationConfig config_;
    const NormalSampleSet* samples_;
    std::size_t dim_ = 0;
    std::vector<double> quote_scale_;  ///< per-quote weight / side count
    std::vector<double> taus_;         ///< quote and grid maturities, ascending
    mutable std::vector<std::vector<nn::BatchTape>> tapes_;
};

ObjectiveValue objective_and_gradient(const Model& model, const OptionChain& train,
                                      const std::optional<SyntheticGrid>& grid,
                                      const CalibrationConfig& config,
                                      const NormalSampleSet& samples);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit AdamState(std::size_t dim = 0) : m(dim, 0.0), v(dim, 0.0) {}
};

/// One bias-corrected Adam update of params. Throws std::invalid_argument on
/// a shape mismatch.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double learning_rate);

struct CalibrationResult {
    Model model;
    std::vector<double> loss_trajectory;     ///< objective after each iteration
    std::vector<double> penalty_trajectory;  ///< J after each iteration
    double initial_loss = 0.0;
    double final_loss = 0.0;          ///< lowest objective seen, attained by model
    std::size_t best_iteration = 0;   ///< iteration of final_loss; 0 = the start
    std::size_t iterations = 0;
    bool converged = false;
    ErrorMetric train_mse;
    ErrorMetric train_relative_mse;
    PenaltyReport penalty;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_samples = 0;
};

/// Initial model for a calibration run (RN-Q: sigma 0.2, u = v = 1.1, A = 4;
/// networks Glorot-initialized from config.seed; alpha 0.5).
Model initial_model(ModelKind kind, const CalibrationConfig& config);

/// Draws the sample set once, builds the synthetic grid from the chain, and
/// runs Adam until config.iterations or convergence (the best loss improved by
/// less than convergence_tol over the last convergence_window iterations). The
/// returned model is the lowest-loss iterate. Throws DataError for an
/// empty chain or RN-Q on several maturities, DivergenceError on a non-finite
/// objective.
CalibrationResult calibrate(ModelKind kind, const OptionChain& train, const CalibrationConfig& config,
                            std::optional<Model> start = std::nullopt);

/// Same, on a caller-provided sample set.
CalibrationResult calibrate_with_samples(const Model& start, const OptionChain& train,
                                         const CalibrationConfig& config,
                                         const NormalSampleSet& samples);

nlohmann::json to_json(const CalibrationConfig& config);
/// Result without the model parameters (those go to the checkpoint).
nlohmann::json to_json(const CalibrationResult& result, bool include_wall_time = true);

} // namespace rngn
