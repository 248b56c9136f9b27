#include "rngn/stability.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "rngn/error.hpp"
#include "rngn/random.hpp"

namespace rngn {

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<double> row_values(const TrialOutcome& t) {
    auto v = characteristic_values(t.rnd);
    v.push_back(t.train_mse);
    return v;
}

} // namespace

void PerturbationOptions::validate() const {
    if (trials < 2) throw std::invalid_argument("perturbation needs at least two trials");
    if (!(tick >= 0.0) || !std::isfinite(tick)) throw std::invalid_argument("tick must be >= 0");
}

OptionChain perturb_chain(const OptionChain& chain, double tick, std::uint64_t seed,
                          std::uint64_t trial) {
    const CounterRng rng(seed, trial);
    OptionChain out = chain;
    for (std::size_t i = 0; i < out.quotes.size(); ++i) {
        const double shift = (rng.bits(i) >> 63) ? tick : -tick;
        auto& q = out.quotes[i];
        q.bid += shift;
        q.ask += shift;
        q.mid += shift;
    }
    return out;
}

const std::vector<std::string>& stability_columns() {
    static const std::vector<std::string> names = [] {
        auto v = characteristic_names();
        v.push_back("train_mse");
        return v;
    }();
    return names;
}

StabilityReport perturbation_study(ModelKind kind, const OptionChain& train,
                                   const CalibrationConfig& config,
                                   const PerturbationOptions& options) {
    options.validate();
    config.validate();
    if (train.quotes.empty()) throw DataError("empty training chain");
    StabilityReport report;
    report.tau = train.maturities().front();
    const double rate = train.rate_at(report.tau);
    const auto samples = draw_standard_normal(config.n_samples, config.seed, config.antithetic);
    const Model start = initial_model(kind, config);

    for (std::size_t t = 0; t < options.trials; ++t) {
        TrialOutcome outcome;
        try {
            const auto chain = perturb_chain(train, options.tick, options.seed, t);
            const auto fit = calibrate_with_samples(start, chain, config, samples);
            auto x = sample_log_returns(fit.model, report.tau, rate, samples);
            for (double& v : x) v = train.spot * std::exp(v);
            outcome.rnd = characteristics(x);
            outcome.train_mse = fit.train_mse.value;
        } catch (const DivergenceError& e) {
            outcome.diverged = true;
            outcome.error = e.what();
        } catch (const NumericalError& e) {
            outcome.diverged = true;
            outcome.error = e.what();
        }
        report.trials.push_back(std::move(outcome));
    }

    const std::size_t cols = stability_columns().size();
    std::vector<std::vector<double>> columns(cols);
    for (const auto& t : report.trials) {
        if (t.diverged) continue;
        const auto v = row_values(t);
        for (std::size_t c = 0; c < cols; ++c) columns[c].push_back(v[c]);
        ++report.used;
    }
    report.std_dev.assign(cols, std::numeric_limits<double>::quiet_NaN());
    if (report.used < 2) return report;
    for (std::size_t c = 0; c < cols; ++c) {
        const auto& col = columns[c];
        // Shifted by the first value, so identical trials give exactly zero.
        double mean = 0.0;
        for (double v : col) mean += v - col[0];
        mean /= static_cast<double>(col.size());
        double ss = 0.0;
        for (double v : col) ss += (v - col[0] - mean) * (v - col[0] - mean);
        report.std_dev[c] = std::sqrt(ss / static_cast<double>(col.size() - 1));
    }
    return report;
}

std::string format_stability_csv(const StabilityReport& report) {
    std::string out = "trial,diverged";
    for (const auto& name : stability_columns()) out += ',' + name;
    out += '\n';
    const std::size_t cols = stability_columns().size();
    for (std::size_t t = 0; t < report.trials.size(); ++t) {
        const auto& trial = report.trials[t];
        out += std::to_string(t + 1) + (trial.diverged ? ",1" : ",0");
        if (trial.diverged) {
            for (std::size_t c = 0; c < cols; ++c) out += ",";
        } else {
            for (double v : row_values(trial)) out += ',' + fmt(v);
        }
        out += '\n';
    }
    out += "std,";
    for (double v : report.std_dev) out += ',' + fmt(v);
    out += '\n';
    return out;
}

} // namespace rngn
