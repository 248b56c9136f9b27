#include <nlohmann/json.hpp>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rngn/arbitrage.hpp"
#include "rngn/calibration.hpp"
#include "rngn/checkpoint.hpp"
#include "rngn/data_io.hpp"
#include "rngn/density.hpp"
#include "rngn/error.hpp"
#include "rngn/heston.hpp"
#include "rngn/models.hpp"
#include "rngn/parallel.hpp"
#include "rngn/pricing.hpp"
#include "rngn/sampling.hpp"
#include "rngn/stability.hpp"

// One Python class for every model kind instead of a per-alternative conversion.
PYBIND11_MAKE_OPAQUE(rngn::Model)

namespace py = pybind11;
using namespace rngn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_array(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

std::span<const double> view(const Array& a) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a one-dimensional array");
    return {a.data(), static_cast<std::size_t>(a.size())};
}

py::dict as_dict(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump()).cast<py::dict>();
}

} // namespace

PYBIND11_MODULE(_rngn, m) {
    m.doc() = "Neural risk-neutral density estimation";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<UnsupportedModelError>(m, "UnsupportedModelError", data.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

    m.def("set_thread_count", &set_thread_count, py::arg("n"));
    m.def("thread_count", &thread_count);

    py::enum_<OptionSide>(m, "OptionSide").value("call", OptionSide::call).value("put", OptionSide::put);
    py::enum_<ModelKind>(m, "ModelKind")
        .value("rn_q", ModelKind::rn_q)
        .value("rn_mlp", ModelKind::rn_mlp)
        .value("rn_dmlp", ModelKind::rn_dmlp);
    py::enum_<LossKind>(m, "LossKind").value("absolute", LossKind::absolute).value("relative", LossKind::relative);

    // Samples
    py::class_<NormalSampleSet>(m, "SampleSet")
        .def("__len__", &NormalSampleSet::size)
        .def_property_readonly("values", [](const NormalSampleSet& s) { return to_array(s.values); });
    m.def("draw_standard_normal", &draw_standard_normal, py::arg("n"), py::arg("seed"),
          py::arg("antithetic") = false);

    // Data
    py::class_<OptionQuote>(m, "OptionQuote")
        .def_readonly("side", &OptionQuote::side)
        .def_readonly("strike", &OptionQuote::strike)
        .def_readonly("days", &OptionQuote::days)
        .def_readonly("tau", &OptionQuote::tau)
        .def_readonly("bid", &OptionQuote::bid)
        .def_readonly("ask", &OptionQuote::ask)
        .def_readonly("mid", &OptionQuote::mid);
    m.def("make_quote", &make_quote, py::arg("side"), py::arg("strike"), py::arg("days"), py::arg("bid"),
          py::arg("ask"));
    py::class_<RatePoint>(m, "RatePoint")
        .def(py::init<double, double>(), py::arg("tenor_days"), py::arg("rate"))
        .def_readwrite("tenor_days", &RatePoint::tenor_days)
        .def_readwrite("rate", &RatePoint::rate);
    py::class_<OptionChain>(m, "OptionChain")
        .def(py::init<>())
        .def_readwrite("spot", &OptionChain::spot)
        .def_readwrite("observation_date", &OptionChain::observation_date)
        .def_readwrite("quotes", &OptionChain::quotes)
        .def_readwrite("rate_curve", &OptionChain::rate_curve)
        .def("rate_at", &OptionChain::rate_at, py::arg("tau"))
        .def("maturities", &OptionChain::maturities)
        .def("strikes", &OptionChain::strikes)
        .def("mid_prices", [](const OptionChain& c) { return to_array(c.mid_prices()); })
        .def("__len__", [](const OptionChain& c) { return c.quotes.size(); });
    m.def(
        "load_chain",
        [](const std::filesystem::path& chain, std::optional<std::filesystem::path> rates,
           std::optional<double> rate, std::optional<double> spot, double min_price) {
            LoadOptions opts;
            opts.rates_path = std::move(rates);
            opts.flat_rate = rate;
            opts.spot = spot;
            opts.min_price = min_price;
            return load_chain(chain, opts);
        },
        py::arg("chain"), py::arg("rates") = std::nullopt, py::arg("rate") = std::nullopt,
        py::arg("spot") = std::nullopt, py::arg("min_price") = 0.025);
    m.def("format_chain", &format_chain, py::arg("chain"));
    m.def(
        "split_train_test",
        [](const OptionChain& c) {
            auto s = split_train_test(c);
            return py::make_tuple(s.train, s.test, s.extreme);
        },
        py::arg("chain"), "Returns (train, test, extreme).");

    // Models
    py::class_<Model>(m, "Model")
        .def_property_readonly("kind", [](const Model& mod) { return kind_of(mod); })
        .def_property_readonly("parameter_count", [](const Model& mod) { return raw_parameter_count(mod); })
        .def("raw_parameters", [](const Model& mod) { return to_raw(mod); })
        .def(
            "with_raw_parameters",
            [](const Model& mod, const Array& raw) {
                Model out = mod;
                from_raw(out, view(raw));
                return out;
            },
            py::arg("raw"));
    m.def(
        "rnq",
        [](double mu, double sigma, double u, double v, double a_const) {
            RnQParams p{mu, sigma, u, v, a_const};
            p.validate();
            return Model{p};
        },
        py::arg("mu"), py::arg("sigma"), py::arg("u"), py::arg("v"), py::arg("a_const") = 4.0);
    m.def(
        "rnq_martingale",
        [](double sigma, double u, double v, const NormalSampleSet& s, double rate, double tau, double a_const) {
            RnQParams p{0.0, sigma, u, v, a_const};
            p.mu = rnq_mu_from_constraint(sigma, u, v, a_const, s, rate, tau);
            return Model{p};
        },
        py::arg("sigma"), py::arg("u"), py::arg("v"), py::arg("samples"), py::arg("rate"), py::arg("tau"),
        py::arg("a_const") = 4.0, "RN-Q with the location set by the martingale condition.");
    m.def(
        "rnmlp", [](std::uint64_t seed, std::size_t hidden, double sigma) { return Model{make_rnmlp(seed, hidden, sigma)}; },
        py::arg("seed"), py::arg("hidden") = 32, py::arg("sigma") = 0.2);
    m.def(
        "zero_rnmlp", [](double sigma, std::size_t hidden) { return Model{make_zero_rnmlp(sigma, hidden)}; },
        py::arg("sigma"), py::arg("hidden") = 32);
    m.def(
        "rndmlp",
        [](std::uint64_t seed, std::size_t hidden, double alpha) { return Model{make_rndmlp(seed, hidden, alpha)}; },
        py::arg("seed"), py::arg("hidden") = 32, py::arg("alpha") = 0.5);
    m.def(
        "sample_log_returns",
        [](const Model& mod, double tau, double rate, const NormalSampleSet& s) {
            return to_array(sample_log_returns(mod, tau, rate, s));
        },
        py::arg("model"), py::arg("tau"), py::arg("rate"), py::arg("samples"));

    // Pricing
    m.def(
        "price",
        [](const Model& mod, OptionSide side, double spot, double strike, double tau, double rate,
           const NormalSampleSet& s) { return price(mod, {side, spot, strike, tau, rate}, s); },
        py::arg("model"), py::arg("side"), py::arg("spot"), py::arg("strike"), py::arg("tau"), py::arg("rate"),
        py::arg("samples"));
    m.def(
        "price_chain",
        [](const Model& mod, const OptionChain& c, const NormalSampleSet& s) {
            return to_array(price_chain(mod, c, s));
        },
        py::arg("model"), py::arg("chain"), py::arg("samples"));

    // Arbitrage
    m.def(
        "penalty",
        [](const Model& mod, const OptionChain& c, const NormalSampleSet& s) {
            const auto grid = build_synthetic_grid(c.maturities(), c.strikes(), quoted_sides(c));
            return as_dict(to_json(total_penalty(mod, grid, c.spot, [&](double t) { return c.rate_at(t); }, s)));
        },
        py::arg("model"), py::arg("chain"), py::arg("samples"),
        "Penalty report on the synthetic grid of the chain, as a dict.");
    m.def(
        "audit",
        [](const Model& mod, std::vector<double> taus, std::vector<double> strikes, double spot, double rate,
           const NormalSampleSet& s, bool calls, bool puts) {
            const GridSides sides{calls, puts};
            return as_dict(
                to_json(audit_surface(mod, taus, strikes, spot, [=](double) { return rate; }, s, sides)));
        },
        py::arg("model"), py::arg("taus"), py::arg("strikes"), py::arg("spot"), py::arg("rate"), py::arg("samples"),
        py::arg("calls") = true, py::arg("puts") = true,
        "Static-arbitrage audit; calls/puts select the sides of the maturity check.");

    // Calibration
    py::class_<CalibrationConfig>(m, "CalibrationConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &CalibrationConfig::learning_rate)
        .def_readwrite("iterations", &CalibrationConfig::iterations)
        .def_readwrite("lambda_", &CalibrationConfig::lambda)
        .def_readwrite("n_samples", &CalibrationConfig::n_samples)
        .def_readwrite("seed", &CalibrationConfig::seed)
        .def_readwrite("loss_kind", &CalibrationConfig::loss_kind)
        .def_readwrite("convergence_tol", &CalibrationConfig::convergence_tol)
        .def_readwrite("convergence_window", &CalibrationConfig::convergence_window)
        .def_readwrite("hidden", &CalibrationConfig::hidden)
        .def_readwrite("antithetic", &CalibrationConfig::antithetic);
    py::class_<CalibrationResult>(m, "CalibrationResult")
        .def_readonly("model", &CalibrationResult::model)
        .def_property_readonly("loss_trajectory",
                               [](const CalibrationResult& r) { return to_array(r.loss_trajectory); })
        .def_readonly("final_loss", &CalibrationResult::final_loss)
        .def_readonly("best_iteration", &CalibrationResult::best_iteration)
        .def_readonly("iterations", &CalibrationResult::iterations)
        .def_readonly("converged", &CalibrationResult::converged)
        .def_property_readonly("train_mse", [](const CalibrationResult& r) { return r.train_mse.value; })
        .def_property_readonly("penalty", [](const CalibrationResult& r) { return r.penalty.total; })
        .def("to_dict", [](const CalibrationResult& r) { return as_dict(to_json(r, false)); });
    m.def(
        "calibrate",
        [](ModelKind kind, const OptionChain& c, const CalibrationConfig& cfg) {
            py::gil_scoped_release release;
            return calibrate(kind, c, cfg);
        },
        py::arg("kind"), py::arg("chain"), py::arg("config") = CalibrationConfig{});

    // Density
    py::class_<RndCharacteristics>(m, "RndCharacteristics")
        .def_readonly("mean", &RndCharacteristics::mean)
        .def_readonly("std", &RndCharacteristics::std)
        .def_readonly("skewness", &RndCharacteristics::skewness)
        .def_readonly("skew_pm", &RndCharacteristics::skew_pm)
        .def_readonly("skew_am", &RndCharacteristics::skew_am)
        .def_readonly("kurtosis", &RndCharacteristics::kurtosis)
        .def_readonly("x01", &RndCharacteristics::x01)
        .def_readonly("x05", &RndCharacteristics::x05)
        .def_readonly("x95", &RndCharacteristics::x95)
        .def_readonly("x99", &RndCharacteristics::x99);
    m.def("characteristics", [](const Array& v) { return characteristics(view(v)); }, py::arg("values"));
    py::class_<RiskNeutralMoments>(m, "RiskNeutralMoments")
        .def_readonly("rnm2", &RiskNeutralMoments::rnm2)
        .def_readonly("rnm3", &RiskNeutralMoments::rnm3)
        .def_readonly("rnm4", &RiskNeutralMoments::rnm4);
    m.def("risk_neutral_moments", &risk_neutral_moments, py::arg("model"), py::arg("tau"), py::arg("rate"),
          py::arg("samples"));
    m.def(
        "kde_log_return",
        [](const Model& mod, double tau, double rate, const NormalSampleSet& s, const Array& grid) {
            const auto est = kde_log_return(mod, tau, rate, s, view(grid));
            return py::make_tuple(to_array(est.grid), to_array(est.values));
        },
        py::arg("model"), py::arg("tau"), py::arg("rate"), py::arg("samples"), py::arg("grid"),
        "Returns (grid, density) of the log-return.");
    m.def("parse_tau_list", &parse_tau_list, py::arg("labels"));

    // Heston
    py::class_<HestonParams>(m, "HestonParams")
        .def(py::init([](double nu0, double vartheta, double kappa, double xi, double rho) {
                 HestonParams p{nu0, vartheta, kappa, xi, rho};
                 p.validate();
                 return p;
             }),
             py::arg("nu0"), py::arg("vartheta"), py::arg("kappa"), py::arg("xi"), py::arg("rho"))
        .def_readonly("nu0", &HestonParams::nu0)
        .def_readonly("vartheta", &HestonParams::vartheta)
        .def_readonly("kappa", &HestonParams::kappa)
        .def_readonly("xi", &HestonParams::xi)
        .def_readonly("rho", &HestonParams::rho)
        .def("feller", &HestonParams::feller);
    py::class_<HestonScenario>(m, "HestonScenario")
        .def_readonly("name", &HestonScenario::name)
        .def_readonly("params", &HestonScenario::params)
        .def_readonly("spot", &HestonScenario::spot)
        .def_readonly("rate", &HestonScenario::rate)
        .def_readonly("taus", &HestonScenario::taus)
        .def_readonly("strikes", &HestonScenario::strikes);
    m.def("heston_scenario", &heston_scenario, py::arg("name"));
    m.def("heston_scenario_names", &heston_scenario_names);
    m.def("heston_price", &heston_price, py::arg("params"), py::arg("side"), py::arg("spot"), py::arg("strike"),
          py::arg("tau"), py::arg("rate"));
    m.def("heston_cf", &heston_cf, py::arg("params"), py::arg("u"), py::arg("tau"), py::arg("spot"),
          py::arg("rate"));
    m.def(
        "heston_true_moments",
        [](const HestonParams& p, double tau, double rate) {
            const auto h = heston_true_moments(p, tau, rate);
            return py::dict(py::arg("mean") = h.mean, py::arg("variance") = h.variance,
                            py::arg("skewness") = h.skewness, py::arg("kurtosis") = h.kurtosis);
        },
        py::arg("params"), py::arg("tau"), py::arg("rate"));
    m.def("generate_simulated_chain", &generate_simulated_chain, py::arg("scenario"));

    // Checkpoints
    m.def(
        "save_checkpoint",
        [](const std::filesystem::path& path, const Model& mod, std::optional<double> spot,
           std::optional<std::uint64_t> seed, std::optional<std::size_t> n_samples) {
            write_checkpoint(path, mod, {spot, seed, n_samples, std::nullopt, {}});
        },
        py::arg("path"), py::arg("model"), py::arg("spot") = std::nullopt, py::arg("seed") = std::nullopt,
        py::arg("n_samples") = std::nullopt);
    m.def(
        "load_checkpoint", [](const std::filesystem::path& path) { return read_checkpoint(path).model; },
        py::arg("path"));

    // Stability
    m.def(
        "perturb_chain", &perturb_chain, py::arg("chain"), py::arg("tick"), py::arg("seed"), py::arg("trial"));
}
