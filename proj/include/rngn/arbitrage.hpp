#pragma once

// Static no-arbitrage: calendar and martingale penalties on a synthetic grid,
// plus a numeric audit of a priced call/put surface.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rngn/data_io.hpp"
#include "rngn/models.hpp"
#include "rngn/sampling.hpp"

namespace rngn {

using RateFn = std::function<double(double)>;

struct GridPoint {
    double tau = 0.0;
    double strike = 0.0;
    OptionSide side = OptionSide::call;

    bool operator==(const GridPoint&) const = default;
};

/// Which calendar checks a grid carries at each (tau, K).
struct GridSides {
    bool calls = true;
    bool puts = true;

    bool operator==(const GridSides&) const = default;
};

struct SyntheticGrid {
    std::vector<double> taus;     ///< ascending, with adjacent midpoints
    std::vector<double> strikes;  ///< ascending, with adjacent midpoints
    GridSides sides;
    std::vector<GridPoint> points;
};

/// Sorted, de-duplicated inputs augmented with adjacent midpoints; every
/// (tau, K) pair appears once per selected side, call before put.
/// Throws std::invalid_argument on empty or non-positive input or when no side
/// is selected.
SyntheticGrid build_synthetic_grid(std::span<const double> taus, std::span<const double> strikes,
                                   GridSides sides = {});

/// Sides quoted in the chain: a chain of calls only gets no put checks.
GridSides quoted_sides(const OptionChain& chain);

/// (1/N) sum 1{e^X >= k} [(dX/dtau - r) e^X + r k] with k = K / S. Non-negative
/// means no calendar violation. Throws std::invalid_argument for tau <= 0 or
/// for RN-Q, which has no maturity structure.
double penalty_calendar_call(const Model& model, double tau, double strike, double spot,
                             double rate, const NormalSampleSet& samples);
/// (1/N) sum 1{e^X <= k} [(r - dX/dtau) e^X - r k].
double penalty_calendar_put(const Model& model, double tau, double strike, double spot,
                            double rate, const NormalSampleSet& samples);

/// ln((1/N) sum e^X) - r tau, by log-sum-exp. Throws NumericalError on overflow.
double martingale_residual(std::span<const double> x, double rate, double tau);
/// Squared martingale residual at tau.
double penalty_mu(const Model& model, double tau, double rate, const NormalSampleSet& samples);

/// Calendar penalties at one maturity for ascending scaled strikes k_j = K_j / S,
/// computed by bucketing the samples between strikes.
struct CalendarSlice {
    std::vector<double> call;
    std::vector<double> put;
};
CalendarSlice calendar_slice(std::span<const double> x, std::span<const double> dx,
                             std::span<const double> scaled_strikes, double rate);

/// Adds weight * d/dX_n and weight * d/d(dX_n/dtau) of
/// sum_j max(-call_j, 0) + max(-put_j, 0) to adj_x and adj_dx.
void calendar_slice_adjoint(std::span<const double> x, std::span<const double> dx,
                            std::span<const double> scaled_strikes, double rate,
                            const CalendarSlice& slice, double weight, std::span<double> adj_x,
                            std::span<double> adj_dx);

struct PointPenalty {
    GridPoint point;
    double value = 0.0;
};

struct PenaltyReport {
    std::vector<PointPenalty> points;  ///< calendar value per grid point, grid order
    std::vector<double> mu_taus;
    std::vector<double> mu_values;     ///< squared residual per distinct tau
    double calendar_total = 0.0;
    double mu_total = 0.0;
    double total = 0.0;
    std::size_t violations = 0;        ///< points with a negative calendar value
    double worst = 0.0;                ///< most negative calendar value (0 if none)
};

/// J = sum max(-calendar, 0) + sum over distinct tau of the squared residual.
/// RN-Q contributes only the martingale terms.
PenaltyReport total_penalty(const Model& model, const SyntheticGrid& grid, double spot,
                            const RateFn& rate_fn, const NormalSampleSet& samples);

/// Recomputes the totals, violation count and worst value of a report from its
/// per-point and per-tau entries.
void summarize_penalty(PenaltyReport& report);

nlohmann::json to_json(const PenaltyReport& report);

// Surface audit ---------------------------------------------------------------

/// Prices indexed [tau][strike]; row 0 may be tau == 0.
struct PriceSurface {
    std::vector<double> taus;
    std::vector<double> strikes;
    std::vector<double> rates;                ///< one per tau
    std::vector<std::vector<double>> calls;
    std::vector<std::vector<double>> puts;
    std::vector<double> residuals;            ///< martingale residual per tau (0 at tau == 0)
    std::vector<double> far_call;             ///< call at a strike far above the grid, per tau
    std::vector<double> near_zero_put;        ///< put at a strike near zero, per tau
    double spot = 0.0;
};

PriceSurface price_surface(const Model& model, std::span<const double> taus,
                           std::span<const double> strikes, double spot, const RateFn& rate_fn,
                           const NormalSampleSet& samples);

struct AuditOffender {
    double tau = 0.0;
    double strike = 0.0;
    OptionSide side = OptionSide::call;
    double excess = 0.0;  ///< amount by which the inequality fails
};

struct AuditCheck {
    std::string name;
    bool passed = true;
    bool vacuous = false;
    std::size_t violations = 0;
    double violation_mass = 0.0;
    std::vector<AuditOffender> offenders;  ///< worst first, at most 20
};

struct AuditReport {
    double tolerance = 0.0;
    std::vector<AuditCheck> checks;  ///< six entries in constraint order

    bool passed() const noexcept;
};

/// Checks strike monotonicity, convexity, far-strike limits, intrinsic value at
/// tau == 0, maturity monotonicity, and the parity bounds widened by
/// S |e^residual - 1|. tolerance defaults to 1e-10 S. A tau == 0 row is required
/// for check 4, which is vacuous otherwise; single-maturity models make check 5
/// vacuous. Check 5 covers the sides in calendar_sides: with r > 0 a deep
/// in-the-money European put loses value with maturity, so a calls-only chain
/// is audited on calls.
AuditReport audit_prices(const PriceSurface& surface, bool maturity_structure,
                         double tolerance = -1.0, GridSides calendar_sides = {});

AuditReport audit_surface(const Model& model, std::span<const double> taus,
                          std::span<const double> strikes, double spot, const RateFn& rate_fn,
                          const NormalSampleSet& samples, GridSides calendar_sides = {});

nlohmann::json to_json(const AuditReport& report);

} // namespace rngn
