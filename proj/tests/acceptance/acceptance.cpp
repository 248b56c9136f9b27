// Acceptance criteria. Usage: acceptance <1..10|all> <path to rngn CLI>
// Prints one PASS/FAIL line per criterion; exits non-zero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "rngn/arbitrage.hpp"
#include "rngn/calibration.hpp"
#include "rngn/density.hpp"
#include "rngn/heston.hpp"
#include "rngn/models.hpp"
#include "rngn/pricing.hpp"
#include "rngn/random.hpp"
#include "rngn/stability.hpp"

namespace fs = std::filesystem;
using namespace rngn;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double x, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

constexpr double kSpot = 1000.0;

// Calls above the spot and puts below it, priced by a model on its own samples.
OptionChain model_chain(const Model& m, const NormalSampleSet& s, const std::vector<double>& taus,
                        const std::vector<double>& strikes, double rate) {
    OptionChain chain;
    chain.spot = kSpot;
    chain.observation_date = "synthetic";
    chain.rate_curve = {{365.0, rate}};
    for (double tau : taus) {
        for (double k : strikes) {
            const auto side = k < kSpot ? OptionSide::put : OptionSide::call;
            const double p = price(m, {side, kSpot, k, tau, rate}, s);
            chain.quotes.push_back(make_quote(side, k, tau * 365.0, p, p));
        }
    }
    return chain;
}

// 1. Gradient correctness ------------------------------------------------------

Outcome gradient_correctness() {
    constexpr double kRelTol = 1e-4;
    constexpr double kKinkTol = 1e-6;
    constexpr double kFloor = 1e-6;
    constexpr double kMaxExemptShare = 0.05;
    constexpr double kMaxSeconds = 60.0;
    const Timer timer;

    const auto samples = draw_standard_normal(10'000, 11);
    const auto reference = draw_standard_normal(100'000, 99);
    const Model truth = make_rnmlp(21, 4, 0.25);
    const auto chain = model_chain(truth, reference, {0.1, 0.5}, {900, 950, 1000, 1050, 1100}, 0.03);
    const auto grid = build_synthetic_grid(chain.maturities(), chain.strikes(), quoted_sides(chain));

    CalibrationConfig cfg;
    cfg.hidden = 4;
    // A falling drift makes calls lose value with maturity, so the calendar
    // hinge is active alongside the martingale term.
    auto start_params = make_rnmlp(5, 4, 0.2);
    start_params.net_mu.biases.back()(0) = -8.0;
    const Model start = start_params;
    const Objective objective(start, chain, grid, cfg, samples);
    const auto raw = to_raw(start);
    const auto value = objective.evaluate(raw);
    const auto report = total_penalty(start, grid, kSpot, [&](double t) { return chain.rate_at(t); }, samples);

    auto loss_at = [&](std::size_t i, double h) {
        auto up = raw, down = raw;
        up[i] += h;
        down[i] -= h;
        return (objective.evaluate(up, false).loss - objective.evaluate(down, false).loss) / (2.0 * h);
    };
    // A stencil that crosses an indicator disagrees with the next finer one.
    // The coordinate is exempt only when no pair of consecutive steps agrees.
    constexpr int kRefinements = 4;
    std::size_t exempt = 0, bad = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        double h = 1e-5 * std::max(1.0, std::abs(raw[i]));
        double previous = loss_at(i, h);
        std::optional<double> clean;
        for (int j = 1; j < kRefinements && !clean; ++j) {
            h /= 4.0;
            const double next = loss_at(i, h);
            if (oracle::relative_error(previous, next, kFloor) <= kKinkTol) clean = next;
            previous = next;
        }
        if (!clean) {
            ++exempt;
            continue;
        }
        const double err = std::abs(value.gradient[i] - *clean) / std::max(std::abs(*clean), kFloor);
        worst = std::max(worst, err);
        if (err >= kRelTol) ++bad;
    }
    const double secs = timer.seconds();
    const double share = static_cast<double>(exempt) / static_cast<double>(raw.size());
    const bool pass = bad == 0 && share < kMaxExemptShare && secs < kMaxSeconds && report.violations > 0 &&
                      report.mu_total > 0.0;
    return {pass, std::to_string(raw.size()) + " coordinates, " + std::to_string(bad) + " above " + num(kRelTol) +
                      " (worst " + num(worst, 3) + "), " + std::to_string(exempt) + " kink-exempt (" +
                      num(100.0 * share, 3) + "%), " + std::to_string(report.violations) +
                      " calendar violations active, " + num(secs, 3) + " s"};
}

// 2. Arbitrage-free surfaces by construction -----------------------------------

struct SurfaceCheck {
    std::size_t monotone = 0;
    std::size_t convex = 0;
    std::size_t intrinsic = 0;
    double worst_convexity = 0.0;
};

SurfaceCheck check_surface(const PriceSurface& s) {
    constexpr double kConvexTol = 1e-12;
    SurfaceCheck out;
    for (std::size_t t = 0; t < s.taus.size(); ++t) {
        const auto& c = s.calls[t];
        const auto& p = s.puts[t];
        for (std::size_t j = 0; j + 1 < s.strikes.size(); ++j) {
            if (c[j + 1] > c[j]) ++out.monotone;
            if (p[j + 1] < p[j]) ++out.monotone;
        }
        for (std::size_t j = 1; j + 1 < s.strikes.size(); ++j) {
            for (const auto* row : {&c, &p}) {
                const double second = (*row)[j - 1] - 2.0 * (*row)[j] + (*row)[j + 1];
                out.worst_convexity = std::min(out.worst_convexity, second / s.spot);
                if (second < -kConvexTol * s.spot) ++out.convex;
            }
        }
        if (s.taus[t] == 0.0) {
            for (std::size_t j = 0; j < s.strikes.size(); ++j) {
                const double k = s.strikes[j];
                if (c[j] != std::max(s.spot - k, 0.0)) ++out.intrinsic;
                if (p[j] != std::max(k - s.spot, 0.0)) ++out.intrinsic;
            }
        }
    }
    return out;
}

Outcome static_arbitrage_free() {
    const Timer timer;
    const auto samples = draw_standard_normal(100'000, 3);
    std::vector<double> strikes, taus{0.0};
    for (int j = 0; j < 20; ++j) strikes.push_back(500.0 + 50.0 * j);
    for (int t = 0; t < 20; ++t) taus.push_back(0.05 + 0.1 * t);
    const RateFn rate = [](double) { return 0.03; };

    std::vector<std::pair<std::string, Model>> models;
    const CounterRng rng(7);
    for (std::uint64_t i = 0; i < 3; ++i) {
        RnQParams q;
        q.sigma = 0.1 + 0.3 * rng.uniform(3 * i);
        q.u = 1.0 + 0.5 * rng.uniform(3 * i + 1);
        q.v = 1.0 + 0.5 * rng.uniform(3 * i + 2);
        q.mu = rnq_mu_from_constraint(q.sigma, q.u, q.v, q.a_const, samples, 0.03, 0.25);
        models.emplace_back("rn-q#" + std::to_string(i), q);
        models.emplace_back("rn-mlp#" + std::to_string(i), make_rnmlp(40 + i, 8, 0.15 + 0.1 * i));
    }
    models.emplace_back("rn-dmlp(alpha 0.3)", make_rndmlp(50, 8, 0.3));
    models.emplace_back("rn-dmlp(alpha 1.6)", make_rndmlp(51, 8, 1.6));
    {
        CalibrationConfig cfg;
        cfg.hidden = 4;
        cfg.iterations = 200;
        cfg.n_samples = 20'000;
        const auto chain = model_chain(make_rndmlp(60, 4), samples, {0.1, 0.5}, {900, 950, 1000, 1050, 1100}, 0.03);
        models.emplace_back("calibrated rn-dmlp", calibrate(ModelKind::rn_dmlp, chain, cfg).model);
    }

    std::size_t monotone = 0, convex = 0, intrinsic = 0;
    double worst = 0.0;
    for (const auto& [name, m] : models) {
        const auto surface = price_surface(m, taus, strikes, kSpot, rate, samples);
        const auto r = check_surface(surface);
        monotone += r.monotone;
        convex += r.convex;
        intrinsic += r.intrinsic;
        worst = std::min(worst, r.worst_convexity);
    }
    const bool pass = monotone == 0 && convex == 0 && intrinsic == 0;
    return {pass, std::to_string(models.size()) + " models on 20x20 grids plus tau=0: " + std::to_string(monotone) +
                      " monotonicity, " + std::to_string(convex) + " convexity, " + std::to_string(intrinsic) +
                      " intrinsic violations; worst second difference " + num(worst, 3) + " S; " +
                      num(timer.seconds(), 3) + " s"};
}

// 3. Parity and the martingale residual ----------------------------------------

Outcome parity_identity() {
    constexpr double kRnqTol = 1e-10;
    constexpr double kSlack = 1e-10;
    const Timer timer;
    const auto samples = draw_standard_normal(200'000, 8);
    std::vector<double> strikes;
    for (double k = 600.0; k <= 1400.0; k += 100.0) strikes.push_back(k);

    double worst_rnq = 0.0;
    std::size_t rnq_points = 0;
    for (const auto& [sigma, u, v] : std::vector<std::tuple<double, double, double>>{
             {0.2, 1.1, 1.1}, {0.35, 1.4, 1.02}, {0.1, 1.0, 1.6}}) {
        for (double tau : {0.1, 0.25, 1.0}) {
            for (double r : {0.0, 0.04}) {
                RnQParams q{0.0, sigma, u, v, 4.0};
                q.mu = rnq_mu_from_constraint(sigma, u, v, q.a_const, samples, r, tau);
                for (double k : strikes) {
                    const double c = price(q, {OptionSide::call, kSpot, k, tau, r}, samples);
                    const double p = price(q, {OptionSide::put, kSpot, k, tau, r}, samples);
                    worst_rnq = std::max(worst_rnq, std::abs(c - p - (kSpot - k * std::exp(-r * tau))) / kSpot);
                    ++rnq_points;
                }
            }
        }
    }

    std::size_t mlp_violations = 0, mlp_points = 0;
    double worst_ratio = 0.0;
    const std::vector<Model> nets{make_rnmlp(70, 8), make_rnmlp(71, 8, 0.3), make_rndmlp(72, 8, 0.4),
                                  make_rndmlp(73, 8, 1.3)};
    for (const auto& m : nets) {
        for (double tau : {0.02, 0.1, 0.25, 0.5, 1.0, 2.0}) {
            const double r = 0.03;
            const double bound = kSpot * std::abs(std::expm1(std::sqrt(penalty_mu(m, tau, r, samples))));
            for (double k : strikes) {
                const double c = price(m, {OptionSide::call, kSpot, k, tau, r}, samples);
                const double p = price(m, {OptionSide::put, kSpot, k, tau, r}, samples);
                const double err = std::abs(c - p - (kSpot - k * std::exp(-r * tau)));
                ++mlp_points;
                if (err > bound + kSlack * kSpot) ++mlp_violations;
                if (bound > 0.0) worst_ratio = std::max(worst_ratio, err / bound);
            }
        }
    }
    const bool pass = worst_rnq <= kRnqTol && mlp_violations == 0;
    return {pass, "RN-Q worst parity error " + num(worst_rnq, 3) + " S over " + std::to_string(rnq_points) +
                      " points; RN-MLP/RN-DMLP " + std::to_string(mlp_violations) + " of " +
                      std::to_string(mlp_points) + " points above S|e^sqrt(J_mu) - 1| (worst error/bound " +
                      num(worst_ratio, 6) + "); " + num(timer.seconds(), 3) + " s"};
}

// 4. Calendar penalty equals the maturity derivative of the price ---------------

Outcome penalty_derivative_identity() {
    constexpr double kRelTol = 1e-4;
    constexpr std::size_t kConfigs = 50;
    constexpr double kMaxSeconds = 60.0;
    const Timer timer;
    const auto samples = draw_standard_normal(10'000, 5);
    const CounterRng rng(17);
    std::uint64_t counter = 0;
    auto uniform = [&](double a, double b) { return a + (b - a) * rng.uniform(counter++); };

    std::size_t checked[2] = {0, 0}, failed[2] = {0, 0}, rejected = 0, empty = 0;
    double worst[2] = {0.0, 0.0};
    for (int side = 0; side < 2; ++side) {
        const auto option = side == 0 ? OptionSide::call : OptionSide::put;
        std::uint64_t model_seed = 100 + 1000 * static_cast<std::uint64_t>(side);
        while (checked[side] < kConfigs) {
            const bool mixture = uniform(0.0, 1.0) < 0.5;
            const Model m = mixture ? Model{make_rndmlp(model_seed++, 8, uniform(0.2, 0.8))}
                                    : Model{make_rnmlp(model_seed++, 8, uniform(0.1, 0.35))};
            const double tau = uniform(0.05, 1.5);
            const double strike = kSpot * uniform(0.85, 1.15);
            const double r = uniform(0.0, 0.05);
            const double h = 1e-5 * tau;
            const double k = strike / kSpot;
            const auto lo = sample_log_returns(m, tau - h, r, samples);
            const auto mid = sample_log_returns(m, tau, r, samples);
            const auto hi = sample_log_returns(m, tau + h, r, samples);
            bool crossed = false;
            std::size_t in_money = 0;
            for (std::size_t n = 0; n < samples.size() && !crossed; ++n) {
                const bool a = std::exp(lo[n]) >= k, b = std::exp(mid[n]) >= k, c = std::exp(hi[n]) >= k;
                crossed = a != b || b != c;
                if (b == (option == OptionSide::call)) ++in_money;
            }
            if (crossed) {
                ++rejected;
                continue;
            }
            // Both sides are exactly zero with no sample in the money; the
            // relative error is undefined there.
            if (in_money == 0) {
                ++empty;
                continue;
            }
            const double fd = (price(m, {option, kSpot, strike, tau + h, r}, samples) -
                               price(m, {option, kSpot, strike, tau - h, r}, samples)) /
                              (2.0 * h);
            const double j = option == OptionSide::call ? penalty_calendar_call(m, tau, strike, kSpot, r, samples)
                                                        : penalty_calendar_put(m, tau, strike, kSpot, r, samples);
            const double identity = kSpot * std::exp(-r * tau) * j;
            const double err = std::abs(identity - fd) / std::abs(fd);
            worst[side] = std::max(worst[side], err);
            if (!(err < kRelTol)) ++failed[side];
            ++checked[side];
        }
    }
    const double secs = timer.seconds();
    const bool pass = failed[0] == 0 && failed[1] == 0 && secs < kMaxSeconds;
    return {pass, "calls " + std::to_string(failed[0]) + "/" + std::to_string(checked[0]) + " failed (worst " +
                      num(worst[0], 3) + "), puts " + std::to_string(failed[1]) + "/" + std::to_string(checked[1]) +
                      " failed (worst " + num(worst[1], 3) + "), " + std::to_string(rejected) +
                      " configurations skipped for indicator crossings and " + std::to_string(empty) +
                      " with no sample in the money, " + num(secs, 3) + " s"};
}

// 5. Heston engine cross-validation ---------------------------------------------

Outcome heston_cross_validation() {
    constexpr double kStdErrs = 3.0;
    constexpr double kForwardTol = 1e-8;
    constexpr double kBsTol = 1e-6;
    constexpr double kMaxSeconds = 300.0;
    const Timer timer;

    struct Case {
        std::string scenario;
        std::vector<double> strikes;
    };
    const std::vector<Case> cases{{"left-skew", {800, 900, 1000, 1100, 1200}},
                                  {"right-skew", {800, 900, 1000, 1100, 1200}},
                                  {"long-maturity", {600, 800, 1000, 1300, 1600}}};
    std::size_t points = 0, outside = 0;
    double worst_z = 0.0;
    std::uint64_t seed = 31;
    for (const auto& c : cases) {
        const auto sc = heston_scenario(c.scenario);
        const double tau = sc.taus.front();
        const auto x = heston_mc_log_returns(sc.params, tau, sc.rate, 1'000'000, 500, seed++);
        for (double k : c.strikes) {
            const auto mc = price_from_log_returns(x, {OptionSide::call, sc.spot, k, tau, sc.rate});
            const double cf = heston_price(sc.params, OptionSide::call, sc.spot, k, tau, sc.rate);
            const double z = std::abs(cf - mc.price) / mc.std_error;
            worst_z = std::max(worst_z, z);
            ++points;
            if (!(z <= kStdErrs)) ++outside;
        }
    }

    double worst_forward = 0.0;
    for (const auto& name : heston_scenario_names()) {
        const auto sc = heston_scenario(name);
        for (double tau : {0.1, 0.25, 1.0, 2.0, 5.0}) {
            const double forward = sc.spot * std::exp(sc.rate * tau);
            const Complex v = heston_cf(sc.params, Complex{0.0, -1.0}, tau, sc.spot, sc.rate);
            worst_forward = std::max(worst_forward, std::abs(v - forward) / forward);
        }
    }

    // Deterministic variance path v(t) = vartheta + (nu0 - vartheta) e^{-kappa t}.
    double worst_bs = 0.0;
    for (const auto& [nu0, vartheta, kappa] : std::vector<std::tuple<double, double, double>>{
             {0.04, 0.04, 1.5}, {0.05, 0.25, 0.15}, {0.09, 0.03, 2.0}}) {
        HestonParams p{nu0, vartheta, kappa, 1e-10, -0.9};
        for (double tau : {0.25, 1.0, 2.0}) {
            const double avg = vartheta + (nu0 - vartheta) * (-std::expm1(-kappa * tau)) / (kappa * tau);
            for (double k : {600.0, 800.0, 1000.0, 1200.0, 1500.0}) {
                const double r = 0.04;
                const double bs = oracle::bs_call(kSpot, k, r, tau, std::sqrt(avg * tau));
                worst_bs = std::max(worst_bs, std::abs(heston_price(p, OptionSide::call, kSpot, k, tau, r) - bs));
            }
        }
    }
    const double secs = timer.seconds();
    const bool pass = outside == 0 && worst_forward <= kForwardTol && worst_bs <= kBsTol && secs < kMaxSeconds;
    return {pass, std::to_string(outside) + " of " + std::to_string(points) +
                      " Fourier prices outside 3 MC standard errors (worst " + num(worst_z, 3) +
                      "); CF forward error " + num(worst_forward, 3) + "; vanishing vol-of-vol vs Black-Scholes " +
                      num(worst_bs, 3) + "; " + num(secs, 3) + " s"};
}

// 6. Simulation-study recovery ----------------------------------------------------

Outcome simulation_recovery() {
    constexpr double kRmseTol = 1.0;
    constexpr double kRnm2Tol = 0.05;
    constexpr double kRnm3Tol = 0.25;
    constexpr double kPenaltyTol = 1e-3;
    constexpr double kMaxSecondsPerScenario = 900.0;
    bool pass = true;
    std::string detail;
    for (const std::string name : {"left-skew", "right-skew", "likely-normal"}) {
        const Timer timer;
        const auto sc = heston_scenario(name);
        const auto chain = generate_simulated_chain(sc);
        CalibrationConfig cfg;
        cfg.n_samples = 100'000;
        cfg.iterations = 5000;
        const auto fit = calibrate(ModelKind::rn_dmlp, chain, cfg);
        const auto samples = draw_standard_normal(cfg.n_samples, cfg.seed);
        const double tau = sc.taus.front();
        const auto got = risk_neutral_moments(fit.model, tau, sc.rate, samples);
        const auto truth = heston_true_moments(sc.params, tau, sc.rate);
        const double true_sd = std::sqrt(truth.variance);
        const double rmse = std::sqrt(fit.train_mse.value);
        const double rnm2_err = std::abs(got.rnm2 / true_sd - 1.0);
        const double rnm3_err = std::abs(got.rnm3 / truth.skewness - 1.0);
        const bool same_sign = (got.rnm3 > 0.0) == (truth.skewness > 0.0);
        const double secs = timer.seconds();
        const bool ok = rmse < kRmseTol && rnm2_err < kRnm2Tol && same_sign && rnm3_err < kRnm3Tol &&
                        fit.penalty.total < kPenaltyTol && secs < kMaxSecondsPerScenario;
        pass = pass && ok;
        detail += (detail.empty() ? "" : "; ") + name + (ok ? " ok" : " FAILED") + ": RMSE " + num(rmse, 3) +
                  ", RNM2 " + num(got.rnm2) + " vs " + num(true_sd) + ", RNM3 " + num(got.rnm3) + " vs " +
                  num(truth.skewness) + ", RNM4 " + num(got.rnm4) + " vs " + num(truth.kurtosis) + ", J " +
                  num(fit.penalty.total, 3) + ", " + std::to_string(fit.iterations) + " iterations, " +
                  num(secs, 3) + " s";
    }
    return {pass, detail};
}

// 7. Self-consistency ----------------------------------------------------------------

Outcome self_consistency() {
    constexpr double kRnqMseTol = 1e-6;
    constexpr double kMlpRmseTol = 5e-4;
    constexpr double kMaxSeconds = 300.0;
    const Timer timer;
    const auto reference = draw_standard_normal(1'000'000, 77);
    std::vector<double> strikes;
    for (double k = 800.0; k <= 1200.0; k += 25.0) strikes.push_back(k);

    RnQParams q{0.0, 0.22, 1.25, 1.08, 4.0};
    q.mu = rnq_mu_from_constraint(q.sigma, q.u, q.v, q.a_const, reference, 0.04, 0.25);
    const auto rnq_chain = model_chain(q, reference, {0.25}, strikes, 0.04);
    CalibrationConfig qcfg;
    qcfg.n_samples = 100'000;
    qcfg.iterations = 3000;
    qcfg.learning_rate = 0.02;
    const auto qfit = calibrate(ModelKind::rn_q, rnq_chain, qcfg);

    // Zero networks: X = sigma sqrt(tau) Z, a martingale when r = sigma^2 / 2.
    const double sigma = 0.2;
    const double rate = 0.5 * sigma * sigma;
    const auto mlp_chain = model_chain(make_zero_rnmlp(sigma), reference, {0.1, 0.25, 0.5}, strikes, rate);
    CalibrationConfig mcfg;
    mcfg.n_samples = 20'000;
    mcfg.iterations = 1500;
    const auto mfit = calibrate(ModelKind::rn_mlp, mlp_chain, mcfg);

    const double rnq_mse = qfit.train_mse.value;
    const double mlp_rmse = std::sqrt(mfit.train_mse.value);
    const double secs = timer.seconds();
    const bool pass = rnq_mse < kRnqMseTol * kSpot * kSpot && mlp_rmse < kMlpRmseTol * kSpot && secs < kMaxSeconds;
    return {pass, "RN-Q re-fit train MSE " + num(rnq_mse, 3) + " (limit " + num(kRnqMseTol * kSpot * kSpot) + ", " +
                      std::to_string(qfit.iterations) + " iterations); zero-net RN-MLP re-fit train RMSE " +
                      num(mlp_rmse, 3) + " (limit " + num(kMlpRmseTol * kSpot) + ", " +
                      std::to_string(mfit.iterations) + " iterations); " + num(secs, 3) + " s"};
}

// 8. Stability under tick perturbations ---------------------------------------------

Outcome stability_harness() {
    constexpr double kMeanStdTol = 0.005;
    constexpr double kTailStdTol = 0.01;
    constexpr double kMaxSeconds = 1800.0;
    const Timer timer;
    const auto sc = heston_scenario("left-skew");
    const auto chain = generate_simulated_chain(sc);
    CalibrationConfig cfg;
    cfg.n_samples = 20'000;
    cfg.iterations = 5000;
    PerturbationOptions opts;
    opts.trials = 10;
    opts.tick = 0.25;
    opts.seed = 2;
    const auto report = perturbation_study(ModelKind::rn_dmlp, chain, cfg, opts);
    const auto& names = stability_columns();
    bool finite = report.used == opts.trials;
    std::string values;
    double mean_std = 0.0, x05_std = 0.0, x95_std = 0.0;
    for (std::size_t c = 0; c < names.size(); ++c) {
        const double v = report.std_dev[c];
        if (names[c] == "train_mse") continue;
        finite = finite && std::isfinite(v);
        values += (values.empty() ? "" : ", ") + names[c] + " " + num(v, 3);
        if (names[c] == "mean") mean_std = v;
        if (names[c] == "x05") x05_std = v;
        if (names[c] == "x95") x95_std = v;
    }
    const double secs = timer.seconds();
    const bool pass = finite && mean_std < kMeanStdTol * kSpot && x05_std < kTailStdTol * kSpot &&
                      x95_std < kTailStdTol * kSpot && secs < kMaxSeconds;
    return {pass, std::to_string(report.used) + "/" + std::to_string(opts.trials) + " trials; std: " + values +
                      "; " + num(secs, 3) + " s"};
}

// 9. Moment and density sanity -------------------------------------------------------

Outcome moment_sanity() {
    constexpr double kRatioTol = 0.01;
    constexpr double kSkewTol = 0.02;
    constexpr double kKurtTol = 0.05;
    constexpr double kDensityTol = 0.02;
    constexpr double kMaxSeconds = 120.0;
    const Timer timer;
    const auto samples = draw_standard_normal(1'000'000, 12);
    const double sigma = 0.2, r = 0.03;
    const Model zero = make_zero_rnmlp(sigma);
    const std::vector<double> taus{1.0 / 52.0, 1.0 / 12.0, 0.25, 0.5, 0.75, 1.0};
    const auto rows = term_structure(zero, taus, [&](double) { return r; }, samples);
    double worst_ratio = 0.0, worst_skew = 0.0, worst_kurt = 0.0;
    for (const auto& row : rows) {
        const double ratio = (row.moments.rnm2 / rows.front().moments.rnm2) / std::sqrt(row.tau / rows.front().tau);
        worst_ratio = std::max(worst_ratio, std::abs(ratio - 1.0));
        worst_skew = std::max(worst_skew, std::abs(row.moments.rnm3));
        worst_kurt = std::max(worst_kurt, std::abs(row.moments.rnm4 - 3.0));
    }

    // Gaussian models against the closed-form normal density.
    double worst_density = 0.0;
    const RnQParams gauss{0.01, 0.25, 1.0, 1.0, 4.0};
    const double gauss_sd = gauss.sigma * (2.0 / gauss.a_const + 1.0);
    struct Case {
        Model model;
        double tau;
        double mean;
        double sd;
    };
    for (const auto& c : std::vector<Case>{{gauss, 0.25, gauss.mu, gauss_sd},
                                           {zero, 0.5, 0.0, sigma * std::sqrt(0.5)}}) {
        std::vector<double> grid;
        for (int i = -300; i <= 300; ++i) grid.push_back(c.mean + c.sd * i / 60.0);
        const auto est = kde_log_return(c.model, c.tau, r, samples, grid);
        const double peak = oracle::normal_pdf(0.0) / c.sd;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double exact = oracle::normal_pdf((grid[i] - c.mean) / c.sd) / c.sd;
            worst_density = std::max(worst_density, std::abs(est.values[i] - exact) / peak);
        }
    }
    const double secs = timer.seconds();
    const bool pass = worst_ratio < kRatioTol && worst_skew < kSkewTol && worst_kurt < kKurtTol &&
                      worst_density < kDensityTol && secs < kMaxSeconds;
    return {pass, "RNM2/sqrt(tau) spread " + num(worst_ratio, 3) + ", max |RNM3| " + num(worst_skew, 3) +
                      ", max |RNM4 - 3| " + num(worst_kurt, 3) + ", density sup error " +
                      num(worst_density, 3) + " of peak; " + num(secs, 3) + " s"};
}

// 10. Determinism through the command-line tool --------------------------------------

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

bool run(const std::string& command, std::string& log) {
    const int rc = std::system((command + " > /dev/null 2>&1").c_str());
    if (rc != 0) log += "command failed (" + std::to_string(rc) + "): " + command + "\n";
    return rc == 0;
}

bool run_pipeline(const fs::path& cli, const fs::path& dir, unsigned threads, std::string& log) {
    const std::string t = " --threads " + std::to_string(threads);
    const std::string exe = quote(cli);
    const fs::path sim = dir / "simulate";
    const std::string chain = " --chain " + quote(sim / "chain.csv") + " --rates " + quote(sim / "rates.csv") +
                              " --min-price 0";
    const std::string ckpt = " --checkpoint " + quote(dir / "calibrate" / "checkpoint.json");
    bool ok = run(exe + " simulate --scenario left-skew --taus 1m,3m" + t + " --out " + quote(sim), log);
    ok = ok && run(exe + " calibrate" + chain + " --model rn-dmlp --hidden 4 --samples 20000 --iterations 40 "
                         "--no-split --seed 5" + t + " --out " + quote(dir / "calibrate"), log);
    ok = ok && run(exe + " evaluate" + chain + ckpt + t + " --out " + quote(dir / "evaluate"), log);
    ok = ok && run(exe + " report" + ckpt + t + " --out " + quote(dir / "report"), log);
    ok = ok && run(exe + " audit" + chain + ckpt + t + " --out " + quote(dir / "audit"), log);
    ok = ok && run(exe + " perturb" + chain + " --model rn-mlp --hidden 4 --samples 5000 --iterations 20 "
                         "--trials 3 --no-split --seed 9" + t + " --out " + quote(dir / "perturb"), log);
    return ok;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Relative paths of every output except the manifests, which carry wall time.
std::vector<fs::path> outputs(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") out.push_back(fs::relative(e.path(), dir));
    }
    std::sort(out.begin(), out.end());
    return out;
}

Outcome determinism(const fs::path& cli) {
    const Timer timer;
    const fs::path root = fs::temp_directory_path() / ("rngn_determinism_" + std::to_string(::getpid()));
    fs::remove_all(root);
    std::string log;
    const bool ran = run_pipeline(cli, root / "a", 1, log) && run_pipeline(cli, root / "b", 1, log) &&
                     run_pipeline(cli, root / "c", 8, log);
    std::size_t files = 0, repeat_diff = 0, thread_diff = 0;
    if (ran) {
        const auto a = outputs(root / "a");
        files = a.size();
        if (outputs(root / "b") != a || outputs(root / "c") != a) {
            log += "output file sets differ\n";
        } else {
            for (const auto& rel : a) {
                const auto ref = slurp(root / "a" / rel);
                if (slurp(root / "b" / rel) != ref) ++repeat_diff;
                if (slurp(root / "c" / rel) != ref) ++thread_diff;
            }
        }
    }
    fs::remove_all(root);
    const bool pass = ran && log.empty() && files > 0 && repeat_diff == 0 && thread_diff == 0;
    return {pass, std::to_string(files) + " output files over six commands; " + std::to_string(repeat_diff) +
                      " differ on re-run, " + std::to_string(thread_diff) + " differ between 1 and 8 threads; " +
                      num(timer.seconds(), 3) + " s" + (log.empty() ? "" : "\n" + log)};
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <1..10|all> [path to rngn CLI]\n";
        return 2;
    }
    const std::string which = argv[1];
    const fs::path cli = argc > 2 ? fs::path(argv[2]) : fs::path("rngn");
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradient_correctness},
        {"static arbitrage by construction", static_arbitrage_free},
        {"parity and martingale residual", parity_identity},
        {"penalty-derivative identity", penalty_derivative_identity},
        {"Heston engine cross-validation", heston_cross_validation},
        {"simulation-study recovery", simulation_recovery},
        {"self-consistency re-fit", self_consistency},
        {"stability harness", stability_harness},
        {"moment and density sanity", moment_sanity},
        {"determinism", [&] { return determinism(cli); }},
    };
    bool all_pass = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (which != "all" && which != std::to_string(i + 1)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all_pass = all_pass && o.pass;
        std::cout << "criterion " << (i + 1) << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL")
                  << "  " << o.detail << std::endl;
    }
    return all_pass ? 0 : 1;
}
