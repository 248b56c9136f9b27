#include "rngn/density.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "rngn/error.hpp"
#include "rngn/parallel.hpp"

namespace rngn {

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

double DensityEstimate::integral() const {
    CompensatedSum s;
    for (std::size_t i = 1; i < grid.size(); ++i) s.add(0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]));
    return s.value();
}

SampleMoments sample_moments(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("no samples");
    const double n = static_cast<double>(v.size());
    const auto s1 = chunked_sums<1>(v.size(), [&](std::size_t b, std::size_t e, auto& acc) {
        for (std::size_t i = b; i < e; ++i) acc[0] += v[i];
    });
    const double mean = s1[0] / n;
    const auto s = chunked_sums<3>(v.size(), [&](std::size_t b, std::size_t e, auto& acc) {
        for (std::size_t i = b; i < e; ++i) {
            const double d = v[i] - mean;
            const double d2 = d * d;
            acc[0] += d2;
            acc[1] += d2 * d;
            acc[2] += d2 * d2;
        }
    });
    const double m2 = s[0] / n;
    if (!(m2 > 0.0)) throw NumericalError("zero-variance sample");
    SampleMoments out;
    out.mean = mean;
    out.std = std::sqrt(m2);
    out.skewness = (s[1] / n) / (m2 * out.std);
    out.kurtosis = (s[2] / n) / (m2 * m2);
    return out;
}

double quantile_sorted(std::span<const double> x, double p) {
    if (x.empty()) throw std::invalid_argument("no samples");
    const double n = static_cast<double>(x.size());
    const double h = (n + 1.0 / 3.0) * p + 1.0 / 3.0;  // 1-based position
    if (h <= 1.0) return x.front();
    if (h >= n) return x.back();
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    return x[lo - 1] + frac * (x[lo] - x[lo - 1]);
}

RndCharacteristics characteristics(std::span<const double> values) {
    if (values.size() < 100) throw std::invalid_argument("characteristics need at least 100 values");
    const auto m = sample_moments(values);
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double q25 = quantile_sorted(sorted, 0.25);
    const double q50 = quantile_sorted(sorted, 0.50);
    const double q75 = quantile_sorted(sorted, 0.75);
    RndCharacteristics c;
    c.mean = m.mean;
    c.std = m.std;
    c.skewness = m.skewness;
    c.kurtosis = m.kurtosis;
    c.skew_pm = (m.mean - q50) / m.std;
    c.skew_am = (q75 - q50) / (q50 - q25);
    c.x01 = quantile_sorted(sorted, 0.01);
    c.x05 = quantile_sorted(sorted, 0.05);
    c.x95 = quantile_sorted(sorted, 0.95);
    c.x99 = quantile_sorted(sorted, 0.99);
    return c;
}

const std::vector<std::string>& characteristic_names() {
    static const std::vector<std::string> names{"mean", "std", "skewness", "skew_pm", "skew_am",
                                                "kurtosis", "x01", "x05", "x95", "x99"};
    return names;
}

std::vector<double> characteristic_values(const RndCharacteristics& c) {
    return {c.mean, c.std, c.skewness, c.skew_pm, c.skew_am, c.kurtosis, c.x01, c.x05, c.x95, c.x99};
}

DensityEstimate kde(std::span<const double> samples, std::span<const double> grid, std::size_t max_points) {
    if (samples.empty()) throw std::invalid_argument("no samples");
    if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("KDE grid must be sorted");
    const std::size_t stride = (samples.size() + max_points - 1) / std::max<std::size_t>(max_points, 1);
    std::vector<double> sub;
    for (std::size_t i = 0; i < samples.size(); i += stride) sub.push_back(samples[i]);
    const double m = static_cast<double>(sub.size());
    const double mean = std::accumulate(sub.begin(), sub.end(), 0.0) / m;
    double ss = 0.0;
    for (double x : sub) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / m);
    if (!(sd > 0.0)) throw NumericalError("KDE needs a sample with positive variance");
    const double h = 1.06 * sd * std::pow(m, -0.2);
    std::sort(sub.begin(), sub.end());

    DensityEstimate est;
    est.grid.assign(grid.begin(), grid.end());
    est.values.assign(grid.size(), 0.0);
    est.bandwidth = h;
    const double reach = 8.0 * h;
    const double norm = 1.0 / (m * h * std::sqrt(2.0 * std::numbers::pi));
    for_each_chunk((grid.size() + 63) / 64, [&](std::size_t c) {
        const std::size_t end = std::min(grid.size(), (c + 1) * 64);
        for (std::size_t g = c * 64; g < end; ++g) {
            const auto lo = std::lower_bound(sub.begin(), sub.end(), grid[g] - reach);
            const auto hi = std::upper_bound(lo, sub.end(), grid[g] + reach);
            double acc = 0.0;
            for (auto it = lo; it != hi; ++it) {
                const double u = (grid[g] - *it) / h;
                acc += std::exp(-0.5 * u * u);
            }
            est.values[g] = acc * norm;
        }
    });
    return est;
}

DensityEstimate kde_log_return(const Model& model, double tau, double rate,
                               const NormalSampleSet& samples, std::span<const double> grid,
                               std::size_t max_points) {
    if (!(tau > 0.0)) throw std::invalid_argument("density needs tau > 0");
    const auto x = sample_log_returns(model, tau, rate, samples);
    return kde(x, grid, max_points);
}

DensityEstimate price_density(const DensityEstimate& q, double spot) {
    if (q.variable != DensityVariable::log_return) {
        throw std::invalid_argument("price_density expects a log-return density");
    }
    DensityEstimate f;
    f.variable = DensityVariable::terminal_price;
    f.bandwidth = q.bandwidth;
    for (std::size_t i = 0; i < q.grid.size(); ++i) {
        const double s = spot * std::exp(q.grid[i]);
        f.grid.push_back(s);
        f.values.push_back(q.values[i] / s);
    }
    return f;
}

std::vector<double> sample_grid(std::span<const double> samples, double width, std::size_t points) {
    if (points < 2) throw std::invalid_argument("grid needs at least two points");
    const auto m = sample_moments(samples);
    std::vector<double> grid(points);
    const double lo = m.mean - width * m.std;
    const double step = 2.0 * width * m.std / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) grid[i] = lo + step * static_cast<double>(i);
    return grid;
}

RiskNeutralMoments risk_neutral_moments(const Model& model, double tau, double rate,
                                        const NormalSampleSet& samples) {
    if (!(tau > 0.0)) throw std::invalid_argument("moments need tau > 0");
    const auto m = sample_moments(sample_log_returns(model, tau, rate, samples));
    return {m.std, m.skewness, m.kurtosis};
}

std::vector<TermStructureRow> term_structure(const Model& model, std::span<const double> taus,
                                             const std::function<double(double)>& rate_fn,
                                             const NormalSampleSet& samples) {
    std::vector<TermStructureRow> rows;
    double prev = 0.0;
    for (double t : taus) {
        if (!(t > prev)) throw std::invalid_argument("term-structure maturities must be positive and ascending");
        prev = t;
        rows.push_back({t, risk_neutral_moments(model, t, rate_fn(t), samples)});
    }
    return rows;
}

double parse_tau_label(std::string_view label) {
    if (label.empty()) throw std::invalid_argument("empty maturity label");
    double unit = 1.0;
    switch (label.back()) {
    case 'd': case 'D': unit = 1.0 / 365.0; break;
    case 'w': case 'W': unit = 7.0 / 365.0; break;
    case 'm': case 'M': unit = 1.0 / 12.0; break;
    case 'y': case 'Y': unit = 1.0; break;
    default: unit = 0.0;
    }
    const auto number = unit == 0.0 ? label : label.substr(0, label.size() - 1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
    if (ec != std::errc() || ptr != number.data() + number.size() || !(value > 0.0)) {
        throw std::invalid_argument("bad maturity label '" + std::string(label) + "'");
    }
    return unit == 0.0 ? value : value * unit;
}

std::vector<double> parse_tau_list(std::string_view list) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        auto item = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        out.push_back(parse_tau_label(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string format_density_csv(const DensityEstimate& est) {
    std::string out = "grid,value\n";
    for (std::size_t i = 0; i < est.grid.size(); ++i) out += fmt(est.grid[i]) + ',' + fmt(est.values[i]) + '\n';
    return out;
}

std::string format_term_structure_csv(const std::vector<TermStructureRow>& rows) {
    std::string out = "tau,rnm2,rnm3,rnm4\n";
    for (const auto& r : rows) {
        out += fmt(r.tau) + ',' + fmt(r.moments.rnm2) + ',' + fmt(r.moments.rnm3) + ',' + fmt(r.moments.rnm4) + '\n';
    }
    return out;
}

} // namespace rngn
