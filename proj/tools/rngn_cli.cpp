// rngn: command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 divergence,
// 4 numerical or I/O failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rngn/arbitrage.hpp"
#include "rngn/calibration.hpp"
#include "rngn/checkpoint.hpp"
#include "rngn/data_io.hpp"
#include "rngn/density.hpp"
#include "rngn/error.hpp"
#include "rngn/heston.hpp"
#include "rngn/parallel.hpp"
#include "rngn/pricing.hpp"
#include "rngn/stability.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rngn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitFailure = 4;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 64-bit FNV-1a.
std::string digest(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Options shared by every subcommand.
struct Common {
    std::uint64_t seed = 0;
    std::optional<std::size_t> samples;
    unsigned threads = 0;
    std::optional<double> spot;
    fs::path out = ".";
};

// Records inputs and outputs of one command and writes manifest.json.
class Manifest {
public:
    Manifest(std::string command, const Common& common)
        : command_(std::move(command)), common_(common), start_(std::chrono::steady_clock::now()) {
        fs::create_directories(common_.out);
    }

    void input(const fs::path& path) {
        inputs_.push_back({{"path", path.string()}, {"fnv1a64", digest(read_bytes(path))}});
    }

    void write(const std::string& name, const std::string& content) {
        const fs::path path = common_.out / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << content;
        if (!out) throw std::runtime_error("cannot write " + path.string());
        outputs_.push_back({{"path", path.string()}, {"fnv1a64", digest(content)}});
    }

    void write_json(const std::string& name, const json& doc) { write(name, doc.dump(2) + "\n"); }

    json& config() { return config_; }
    json& checks() { return checks_; }

    void finish() {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json doc{{"command", command_},
                 {"config", config_},
                 {"seed", common_.seed},
                 {"threads", thread_count()},
                 {"inputs", inputs_},
                 {"outputs", outputs_},
                 {"wall_seconds", wall}};
        if (!checks_.is_null()) doc["checks"] = checks_;
        const fs::path path = common_.out / "manifest.json";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << doc.dump(2) << "\n";
    }

private:
    std::string command_;
    Common common_;
    std::chrono::steady_clock::time_point start_;
    json config_ = json::object();
    json checks_;
    json inputs_ = json::array();
    json outputs_ = json::array();
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "Seed of the standard-normal sample set");
    app->add_option("--samples", c.samples, "Number of standard-normal samples");
    app->add_option("--threads", c.threads, "Worker threads (0 = hardware concurrency)");
    app->add_option("--spot", c.spot, "Spot price (overrides the chain or checkpoint)");
    app->add_option("--out", c.out, "Output directory")->capture_default_str();
}

// Chain input flags.
struct ChainInput {
    fs::path chain;
    std::optional<fs::path> rates;
    std::optional<double> rate;
    double min_price = 0.025;
};

void add_chain_input(CLI::App* app, ChainInput& in, bool required = true) {
    auto* opt = app->add_option("--chain", in.chain, "Option chain CSV");
    if (required) opt->required();
    app->add_option("--rates", in.rates, "Rate curve CSV (tenor_days,rate)");
    app->add_option("--rate", in.rate, "Flat risk-free rate when no rate curve is given");
    app->add_option("--min-price", in.min_price, "Drop quotes with bid or ask below this")->capture_default_str();
}

OptionChain load_input_chain(const ChainInput& in, const Common& common, Manifest& manifest,
                             LoadReport* report = nullptr) {
    LoadOptions options;
    options.spot = common.spot;
    options.rates_path = in.rates;
    options.flat_rate = in.rate;
    options.min_price = in.min_price;
    manifest.input(in.chain);
    if (in.rates) manifest.input(*in.rates);
    auto chain = load_chain(in.chain, options, report);
    if (chain.rate_curve.empty()) throw DataError("no rate: pass --rates or --rate");
    return chain;
}

json load_report_json(const LoadReport& r) {
    return {{"rows", r.rows},
            {"dropped_low_price", r.dropped_low_price},
            {"dropped_crossed", r.dropped_crossed},
            {"dropped_sanity", r.dropped_sanity}};
}

// Calibration flags.
struct CalibrationFlags {
    std::string model = "rn-dmlp";
    std::size_t iterations = 5000;
    double learning_rate = 0.01;
    double lambda = 1.0;
    std::string loss = "absolute";
    std::size_t hidden = 32;
    bool antithetic = false;
    bool no_split = false;
};

void add_calibration_flags(CLI::App* app, CalibrationFlags& f) {
    app->add_option("--model", f.model, "rn-q, rn-mlp or rn-dmlp")
        ->capture_default_str()
        ->check(CLI::IsMember({"rn-q", "rn-mlp", "rn-dmlp"}));
    app->add_option("--iterations", f.iterations, "Maximum Adam iterations")->capture_default_str();
    app->add_option("--lr", f.learning_rate, "Adam learning rate")->capture_default_str();
    app->add_option("--lambda", f.lambda, "Penalty weight")->capture_default_str();
    app->add_option("--loss", f.loss, "absolute or relative")
        ->capture_default_str()
        ->check(CLI::IsMember({"absolute", "relative"}));
    app->add_option("--hidden", f.hidden, "Hidden-layer width")->capture_default_str();
    app->add_flag("--antithetic", f.antithetic, "Use antithetic samples");
    app->add_flag("--no-split", f.no_split, "Train on every quote instead of the odd-numbered ones");
}

CalibrationConfig make_config(const CalibrationFlags& f, const Common& c) {
    CalibrationConfig cfg;
    cfg.iterations = f.iterations;
    cfg.learning_rate = f.learning_rate;
    cfg.lambda = f.lambda;
    cfg.loss_kind = parse_loss_kind(f.loss);
    cfg.hidden = f.hidden;
    cfg.antithetic = f.antithetic;
    cfg.seed = c.seed;
    if (c.samples) cfg.n_samples = *c.samples;
    cfg.validate();
    return cfg;
}

OptionChain training_set(const OptionChain& chain, bool no_split) {
    if (no_split) return chain;
    auto split = split_train_test(chain);
    if (split.train.quotes.empty()) throw DataError("no quote with moneyness in [0.8, 1.2] to train on");
    return split.train;
}

// Samples for re-pricing a checkpoint: flags win over the stored metadata.
NormalSampleSet checkpoint_samples(const Checkpoint& cp, const Common& c, bool seed_given) {
    const std::uint64_t seed = seed_given ? c.seed : cp.metadata.seed.value_or(c.seed);
    const std::size_t n = c.samples ? *c.samples : cp.metadata.n_samples.value_or(1'000'000);
    return draw_standard_normal(n, seed);
}

// Surface maturities with a leading tau = 0 row for the intrinsic-value check.
std::vector<double> with_zero_maturity(std::vector<double> taus) {
    if (taus.empty() || taus.front() != 0.0) taus.insert(taus.begin(), 0.0);
    return taus;
}

RateFn rate_function(std::vector<RatePoint> curve) {
    if (curve.empty()) throw DataError("no rate: pass --rate or use a checkpoint with a stored rate curve");
    return [curve = std::move(curve)](double tau) { return interpolate_rate(curve, tau); };
}

std::vector<RatePoint> rate_curve_from(const std::optional<double>& rate,
                                       const std::optional<fs::path>& rates,
                                       const std::vector<RatePoint>& fallback, Manifest& manifest) {
    if (rates) {
        manifest.input(*rates);
        return load_rates(*rates);
    }
    if (rate) return {{1.0, *rate}};
    return fallback;
}

// simulate ---------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::string scenario;
    std::string taus;
};

int run_simulate(const SimulateArgs& a) {
    auto sc = heston_scenario(a.scenario);
    if (a.common.spot) {
        const double scale = *a.common.spot / sc.spot;
        for (double& k : sc.strikes) k *= scale;
        sc.spot = *a.common.spot;
    }
    if (!a.taus.empty()) sc.taus = parse_tau_list(a.taus);
    Manifest manifest("simulate", a.common);
    manifest.config() = {{"scenario", sc.name},
                         {"spot", sc.spot},
                         {"rate", sc.rate},
                         {"taus", sc.taus},
                         {"params",
                          {{"nu0", sc.params.nu0},
                           {"vartheta", sc.params.vartheta},
                           {"kappa", sc.params.kappa},
                           {"xi", sc.params.xi},
                           {"rho", sc.params.rho}}}};
    const auto chain = generate_simulated_chain(sc);
    manifest.write("chain.csv", format_chain(chain));
    manifest.write("rates.csv", format_rates(chain.rate_curve));

    std::string moments = "tau,mean,rnm2,rnm3,rnm4\n";
    std::string density = "tau,strike,value\n";
    std::vector<double> grid;
    for (double k = 0.05 * sc.spot; k <= 4.0 * sc.spot + 1e-9; k += 0.002 * sc.spot) grid.push_back(k);
    for (double tau : sc.taus) {
        const auto m = heston_true_moments(sc.params, tau, sc.rate);
        moments += fmt(tau) + ',' + fmt(m.mean) + ',' + fmt(std::sqrt(m.variance)) + ',' + fmt(m.skewness) +
                   ',' + fmt(m.kurtosis) + '\n';
        const auto rnd = heston_rnd(sc.params, sc.spot, tau, sc.rate, grid);
        for (std::size_t i = 0; i < rnd.grid.size(); ++i)
            density += fmt(tau) + ',' + fmt(rnd.grid[i]) + ',' + fmt(rnd.values[i]) + '\n';
    }
    manifest.write("true_moments.csv", moments);
    manifest.write("true_density.csv", density);
    manifest.finish();
    std::cout << "wrote " << chain.quotes.size() << " quotes to " << (a.common.out / "chain.csv").string() << "\n";
    return 0;
}

// calibrate --------------------------------------------------------------------

struct CalibrateArgs {
    Common common;
    ChainInput input;
    CalibrationFlags flags;
};

int run_calibrate(const CalibrateArgs& a) {
    const auto kind = parse_model_kind(a.flags.model);
    const auto config = make_config(a.flags, a.common);
    Manifest manifest("calibrate", a.common);
    LoadReport load;
    const auto chain = load_input_chain(a.input, a.common, manifest, &load);
    const auto train = training_set(chain, a.flags.no_split);
    manifest.config() = {{"model", to_string(kind)},
                         {"calibration", to_json(config)},
                         {"no_split", a.flags.no_split},
                         {"min_price", a.input.min_price},
                         {"load", load_report_json(load)},
                         {"train_quotes", train.quotes.size()}};

    const auto result = calibrate(kind, train, config);

    CheckpointMetadata meta;
    meta.spot = train.spot;
    meta.seed = config.seed;
    meta.n_samples = config.n_samples;
    const auto taus = train.maturities();
    if (kind == ModelKind::rn_q) meta.tau = taus.front();
    meta.rate_curve = train.rate_curve;
    manifest.write("checkpoint.json", save_checkpoint(result.model, meta));
    manifest.write_json("result.json", to_json(result, false));

    const auto samples = draw_standard_normal(config.n_samples, config.seed, config.antithetic);
    const auto audit = audit_surface(result.model, with_zero_maturity(taus), train.strikes(), train.spot,
                                     [&](double t) { return train.rate_at(t); }, samples, quoted_sides(train));
    manifest.write_json("penalty.json", {{"penalty", to_json(result.penalty)}, {"audit", to_json(audit)}});
    manifest.finish();
    std::cout << to_string(kind) << ": " << result.iterations << " iterations, train RMSE "
              << std::sqrt(result.train_mse.value) << ", penalty " << result.penalty.total << "\n";
    return 0;
}

// evaluate ---------------------------------------------------------------------

struct EvaluateArgs {
    Common common;
    ChainInput input;
    fs::path checkpoint;
    bool no_split = false;
    bool seed_given = false;
};

json set_metrics(const Model& model, const OptionChain& set, const NormalSampleSet& samples,
                 const std::string& name) {
    if (set.quotes.empty()) {
        std::cerr << "warning: " << name << " set is empty\n";
        return {{"quotes", 0}, {"mse", nullptr}, {"relative_mse", nullptr}};
    }
    const auto fitted = price_chain(model, set, samples);
    const auto observed = set.mid_prices();
    std::vector<OptionSide> sides;
    for (const auto& q : set.quotes) sides.push_back(q.side);
    const auto m = mse(observed, fitted, sides);
    const auto rel = relative_mse(observed, fitted, sides);
    json j{{"quotes", set.quotes.size()}, {"mse", m.value}, {"relative_mse", rel.value},
           {"relative_excluded", rel.excluded}};
    if (rel.used == 0) j["relative_mse"] = nullptr;
    return j;
}

int run_evaluate(const EvaluateArgs& a) {
    Manifest manifest("evaluate", a.common);
    manifest.input(a.checkpoint);
    const auto cp = read_checkpoint(a.checkpoint);
    const auto chain = load_input_chain(a.input, a.common, manifest);
    if (cp.metadata.spot && *cp.metadata.spot != chain.spot) {
        std::cerr << "warning: checkpoint spot " << *cp.metadata.spot << " differs from chain spot "
                  << chain.spot << "\n";
    }
    const auto samples = checkpoint_samples(cp, a.common, a.seed_given);
    manifest.config() = {{"model", to_string(kind_of(cp.model))},
                         {"samples", samples.size()},
                         {"sample_seed", samples.seed},
                         {"no_split", a.no_split}};
    json metrics;
    if (a.no_split) {
        metrics["train"] = set_metrics(cp.model, chain, samples, "train");
    } else {
        const auto split = split_train_test(chain);
        metrics["train"] = set_metrics(cp.model, split.train, samples, "train");
        metrics["test"] = set_metrics(cp.model, split.test, samples, "test");
        metrics["extreme"] = set_metrics(cp.model, split.extreme, samples, "extreme");
    }
    manifest.write_json("metrics.json", metrics);
    manifest.finish();
    std::cout << metrics.dump(2) << "\n";
    return 0;
}

// perturb ----------------------------------------------------------------------

struct PerturbArgs {
    Common common;
    ChainInput input;
    CalibrationFlags flags;
    std::size_t trials = 50;
    double tick = 0.25;
};

int run_perturb(const PerturbArgs& a) {
    const auto kind = parse_model_kind(a.flags.model);
    const auto config = make_config(a.flags, a.common);
    PerturbationOptions options;
    options.trials = a.trials;
    options.tick = a.tick;
    options.seed = a.common.seed;
    options.validate();
    Manifest manifest("perturb", a.common);
    const auto chain = load_input_chain(a.input, a.common, manifest);
    const auto train = training_set(chain, a.flags.no_split);
    manifest.config() = {{"model", to_string(kind)},
                         {"calibration", to_json(config)},
                         {"trials", a.trials},
                         {"tick", a.tick},
                         {"no_split", a.flags.no_split},
                         {"train_quotes", train.quotes.size()}};
    const auto report = perturbation_study(kind, train, config, options);
    manifest.write("stability.csv", format_stability_csv(report));
    manifest.checks() = {{"trials_used", report.used}, {"density_tau", report.tau}};
    manifest.finish();
    std::cout << report.used << " of " << report.trials.size() << " trials converged without divergence\n";
    return 0;
}

// report -----------------------------------------------------------------------

struct ReportArgs {
    Common common;
    fs::path checkpoint;
    std::string taus = "1w,1m,3m,6m,9m,1y";
    std::optional<std::string> tau;
    std::optional<double> rate;
    std::optional<fs::path> rates;
    std::size_t grid_points = 401;
    bool seed_given = false;
};

int run_report(const ReportArgs& a) {
    Manifest manifest("report", a.common);
    manifest.input(a.checkpoint);
    const auto cp = read_checkpoint(a.checkpoint);
    const auto rate_fn = rate_function(rate_curve_from(a.rate, a.rates, cp.metadata.rate_curve, manifest));
    const double spot = a.common.spot ? *a.common.spot : cp.metadata.spot.value_or(0.0);
    if (!(spot > 0.0)) throw DataError("no spot: pass --spot or use a checkpoint with a stored spot");
    const auto tau_grid = parse_tau_list(a.taus);
    const double tau = a.tau ? parse_tau_label(*a.tau) : cp.metadata.tau.value_or(tau_grid.front());
    if (!(tau > 0.0)) throw UsageError("--tau must be positive");
    const auto samples = checkpoint_samples(cp, a.common, a.seed_given);
    const double r = rate_fn(tau);
    manifest.config() = {{"model", to_string(kind_of(cp.model))},
                         {"samples", samples.size()},
                         {"sample_seed", samples.seed},
                         {"tau", tau},
                         {"taus", tau_grid},
                         {"spot", spot},
                         {"grid_points", a.grid_points}};

    const auto x = sample_log_returns(cp.model, tau, r, samples);
    const auto grid = sample_grid(x, 8.0, a.grid_points);
    const auto density = kde(x, grid);
    const auto prices = price_density(density, spot);
    manifest.write("density.csv", format_density_csv(density));
    manifest.write("price_density.csv", format_density_csv(prices));

    std::vector<double> terminal(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) terminal[i] = spot * std::exp(x[i]);
    const auto names = characteristic_names();
    const auto log_values = characteristic_values(characteristics(x));
    const auto price_values = characteristic_values(characteristics(terminal));
    std::string ch = "characteristic,log_return,terminal_price\n";
    for (std::size_t i = 0; i < names.size(); ++i)
        ch += names[i] + ',' + fmt(log_values[i]) + ',' + fmt(price_values[i]) + '\n';
    manifest.write("characteristics.csv", ch);

    const auto rows = term_structure(cp.model, tau_grid, rate_fn, samples);
    manifest.write("term_structure.csv", format_term_structure_csv(rows));

    const double mass = density.integral();
    const double price_mass = prices.integral();
    manifest.checks() = {{"density_integral", mass},
                         {"price_density_integral", price_mass},
                         {"density_integral_ok", std::abs(mass - 1.0) < 0.01},
                         {"price_density_integral_ok", std::abs(price_mass - 1.0) < 0.01}};
    manifest.finish();
    std::cout << "density integral " << mass << ", " << rows.size() << " term-structure rows\n";
    return 0;
}

// audit ------------------------------------------------------------------------

struct AuditArgs {
    Common common;
    fs::path checkpoint;
    ChainInput input;
    std::string taus;
    std::string strikes;
    bool seed_given = false;
};

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("not a number: '" + item + "'");
        }
    }
    return out;
}

int run_audit(const AuditArgs& a) {
    Manifest manifest("audit", a.common);
    manifest.input(a.checkpoint);
    const auto cp = read_checkpoint(a.checkpoint);
    std::vector<double> taus, strikes;
    double spot = a.common.spot ? *a.common.spot : cp.metadata.spot.value_or(0.0);
    std::vector<RatePoint> curve = cp.metadata.rate_curve;
    GridSides sides;
    if (!a.input.chain.empty()) {
        const auto chain = load_input_chain(a.input, a.common, manifest);
        taus = chain.maturities();
        strikes = chain.strikes();
        spot = chain.spot;
        curve = chain.rate_curve;
        sides = quoted_sides(chain);
    } else {
        if (a.taus.empty() || a.strikes.empty()) throw UsageError("pass --chain or both --taus and --strikes");
        taus = parse_tau_list(a.taus);
        strikes = parse_number_list(a.strikes);
        curve = rate_curve_from(a.input.rate, a.input.rates, curve, manifest);
    }
    if (!(spot > 0.0)) throw DataError("no spot: pass --spot or use a checkpoint with a stored spot");
    const auto rate_fn = rate_function(curve);
    auto surface_taus = with_zero_maturity(taus);
    const auto samples = checkpoint_samples(cp, a.common, a.seed_given);
    manifest.config() = {{"model", to_string(kind_of(cp.model))},
                         {"samples", samples.size()},
                         {"sample_seed", samples.seed},
                         {"taus", taus},
                         {"strikes", strikes},
                         {"spot", spot}};
    const auto audit = audit_surface(cp.model, surface_taus, strikes, spot, rate_fn, samples, sides);
    json doc{{"audit", to_json(audit)}};
    if (kind_of(cp.model) != ModelKind::rn_q) {
        const auto grid = build_synthetic_grid(taus, strikes, sides);
        doc["penalty"] = to_json(total_penalty(cp.model, grid, spot, rate_fn, samples));
    }
    manifest.write_json("audit.json", doc);
    manifest.checks() = {{"passed", audit.passed()}};
    manifest.finish();
    for (const auto& c : audit.checks) {
        std::cout << c.name << ": " << (c.vacuous ? "vacuous" : c.passed ? "ok" : "VIOLATED") << " ("
                  << c.violations << " points)\n";
    }
    return 0;
}

// Key=value config file: fills options of the chosen subcommand that were not
// given on the command line.
void apply_config_file(const fs::path& path, CLI::App* sub) {
    std::istringstream in(read_bytes(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr) {
            throw UsageError(path.string() + ":" + std::to_string(line_no) + ": unknown key '" + key +
                             "' for " + sub->get_name());
        }
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Risk-neutral density extraction with generative networks"};
    app.require_subcommand(1);
    std::optional<fs::path> config_path;
    app.add_option("--config", config_path, "key=value file with defaults for the subcommand's flags");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Write a Heston option chain with its true density and moments");
    add_common(simulate, sim.common);
    simulate->add_option("--scenario", sim.scenario, "left-skew, likely-normal, right-skew or long-maturity")
        ->required()
        ->check(CLI::IsMember(heston_scenario_names()));
    simulate->add_option("--taus", sim.taus, "Maturities for a multi-maturity chain, e.g. 1m,3m,6m");

    CalibrateArgs cal;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit a model to a chain");
    add_common(calibrate_cmd, cal.common);
    add_chain_input(calibrate_cmd, cal.input);
    add_calibration_flags(calibrate_cmd, cal.flags);

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Price train, test and extreme sets with a checkpoint");
    add_common(evaluate, ev.common);
    add_chain_input(evaluate, ev.input);
    evaluate->add_option("--checkpoint", ev.checkpoint, "Model checkpoint JSON")->required();
    evaluate->add_flag("--no-split", ev.no_split, "Evaluate every quote as one set");

    PerturbArgs pert;
    auto* perturb = app.add_subcommand("perturb", "Re-calibrate on tick-perturbed prices");
    add_common(perturb, pert.common);
    add_chain_input(perturb, pert.input);
    add_calibration_flags(perturb, pert.flags);
    perturb->add_option("--trials", pert.trials, "Number of perturbed re-calibrations")->capture_default_str();
    perturb->add_option("--tick", pert.tick, "Perturbation size")->capture_default_str();

    ReportArgs rep;
    auto* report = app.add_subcommand("report", "Densities, characteristics and moment term structure");
    add_common(report, rep.common);
    report->add_option("--checkpoint", rep.checkpoint, "Model checkpoint JSON")->required();
    report->add_option("--taus", rep.taus, "Term-structure maturities")->capture_default_str();
    report->add_option("--tau", rep.tau, "Maturity of the density (e.g. 3m or 0.25)");
    report->add_option("--rate", rep.rate, "Flat risk-free rate (default: checkpoint rate curve)");
    report->add_option("--rates", rep.rates, "Rate curve CSV");
    report->add_option("--grid-points", rep.grid_points, "Density grid size")->capture_default_str();

    AuditArgs aud;
    auto* audit = app.add_subcommand("audit", "Check a checkpoint's price surface for static arbitrage");
    add_common(audit, aud.common);
    add_chain_input(audit, aud.input, false);
    audit->add_option("--checkpoint", aud.checkpoint, "Model checkpoint JSON")->required();
    audit->add_option("--taus", aud.taus, "Maturities when no chain is given, e.g. 1m,3m");
    audit->add_option("--strikes", aud.strikes, "Strikes when no chain is given, e.g. 900,1000,1100");

    try {
        app.parse(argc, argv);
        CLI::App* chosen = app.get_subcommands().front();
        if (config_path) apply_config_file(*config_path, chosen);
        const bool seed_given = chosen->get_option("--seed")->count() > 0;
        ev.seed_given = rep.seed_given = aud.seed_given = seed_given;
        const unsigned threads = [&] {
            for (const Common* c : {&sim.common, &cal.common, &ev.common, &pert.common, &rep.common, &aud.common})
                if (c->threads != 0) return c->threads;
            return 0u;
        }();
        set_thread_count(threads);

        if (chosen == simulate) return run_simulate(sim);
        if (chosen == calibrate_cmd) return run_calibrate(cal);
        if (chosen == evaluate) return run_evaluate(ev);
        if (chosen == perturb) return run_perturb(pert);
        if (chosen == report) return run_report(rep);
        return run_audit(aud);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << " (iteration " << e.iteration() << ")\n";
        return kExitDivergence;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}
