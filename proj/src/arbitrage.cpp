#include "rngn/arbitrage.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rngn/error.hpp"
#include "rngn/parallel.hpp"
#include "rngn/pricing.hpp"

namespace rngn {

namespace {

std::vector<double> with_midpoints(std::span<const double> values, const char* what) {
    if (values.empty()) throw std::invalid_argument(std::string("empty ") + what);
    std::vector<double> sorted(values.begin(), values.end());
    for (double v : sorted) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
    }
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> out;
    out.reserve(2 * sorted.size() - 1);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i > 0) out.push_back(0.5 * (sorted[i - 1] + sorted[i]));
        out.push_back(sorted[i]);
    }
    return out;
}

LogReturnPaths paths_for(const Model& model, double tau, double rate, const NormalSampleSet& samples) {
    if (!(tau > 0.0)) throw std::invalid_argument("calendar penalty needs tau > 0");
    if (kind_of(model) == ModelKind::rn_q) {
        throw std::invalid_argument("RN-Q has no maturity structure; calendar penalties are undefined");
    }
    return sample_log_return_paths(model, tau, rate, samples);
}

// Chunked, compensated sum of term(n) over n in [0, count).
template <class Term>
double chunked_sum(std::size_t count, Term term) {
    const std::size_t chunks = chunk_count(count);
    std::vector<double> partial(chunks);
    for_each_chunk(chunks, [&](std::size_t c) {
        const std::size_t end = std::min(count, (c + 1) * kSampleChunk);
        CompensatedSum s;
        for (std::size_t n = c * kSampleChunk; n < end; ++n) s.add(term(n));
        partial[c] = s.value();
    });
    CompensatedSum total;
    for (double p : partial) total.add(p);
    return total.value();
}

bool canonical_less(const GridPoint& a, const GridPoint& b) {
    if (a.tau != b.tau) return a.tau < b.tau;
    if (a.strike != b.strike) return a.strike < b.strike;
    return a.side < b.side;
}

double intrinsic(OptionSide side, double spot, double strike) {
    return side == OptionSide::call ? std::max(spot - strike, 0.0) : std::max(strike - spot, 0.0);
}

} // namespace

SyntheticGrid build_synthetic_grid(std::span<const double> taus, std::span<const double> strikes,
                                   GridSides sides) {
    if (!sides.calls && !sides.puts) throw std::invalid_argument("grid needs at least one side");
    SyntheticGrid grid;
    grid.taus = with_midpoints(taus, "maturities");
    grid.strikes = with_midpoints(strikes, "strikes");
    grid.sides = sides;
    grid.points.reserve(2 * grid.taus.size() * grid.strikes.size());
    for (double t : grid.taus) {
        for (double k : grid.strikes) {
            if (sides.calls) grid.points.push_back({t, k, OptionSide::call});
            if (sides.puts) grid.points.push_back({t, k, OptionSide::put});
        }
    }
    return grid;
}

GridSides quoted_sides(const OptionChain& chain) {
    GridSides sides{false, false};
    for (const auto& q : chain.quotes) (q.side == OptionSide::call ? sides.calls : sides.puts) = true;
    return sides;
}

double penalty_calendar_call(const Model& model, double tau, double strike, double spot,
                             double rate, const NormalSampleSet& samples) {
    const auto paths = paths_for(model, tau, rate, samples);
    const double k = strike / spot;
    const double sum = chunked_sum(paths.x.size(), [&](std::size_t n) {
        const double e = std::exp(paths.x[n]);
        return e >= k ? (paths.dx_dtau[n] - rate) * e + rate * k : 0.0;
    });
    return sum / static_cast<double>(paths.x.size());
}

double penalty_calendar_put(const Model& model, double tau, double strike, double spot,
                            double rate, const NormalSampleSet& samples) {
    const auto paths = paths_for(model, tau, rate, samples);
    const double k = strike / spot;
    const double sum = chunked_sum(paths.x.size(), [&](std::size_t n) {
        const double e = std::exp(paths.x[n]);
        return e <= k ? (rate - paths.dx_dtau[n]) * e - rate * k : 0.0;
    });
    return sum / static_cast<double>(paths.x.size());
}

double martingale_residual(std::span<const double> x, double rate, double tau) {
    if (x.empty()) throw std::invalid_argument("no log-return samples");
    const double peak = *std::max_element(x.begin(), x.end());
    if (!std::isfinite(peak)) throw NumericalError("non-finite log-return sample");
    const double sum = chunked_sum(x.size(), [&](std::size_t n) { return std::exp(x[n] - peak); });
    const double residual = peak + std::log(sum / static_cast<double>(x.size())) - rate * tau;
    if (!std::isfinite(residual)) throw NumericalError("martingale residual overflow");
    return residual;
}

double penalty_mu(const Model& model, double tau, double rate, const NormalSampleSet& samples) {
    if (!(tau > 0.0)) throw std::invalid_argument("penalty_mu needs tau > 0");
    const auto x = sample_log_returns(model, tau, rate, samples);
    const double d = martingale_residual(x, rate, tau);
    return d * d;
}

CalendarSlice calendar_slice(std::span<const double> x, std::span<const double> dx,
                             std::span<const double> k, double rate) {
    if (x.size() != dx.size() || x.empty()) throw std::invalid_argument("path size mismatch");
    const std::size_t m = k.size();
    const std::size_t chunks = chunk_count(x.size());
    // Per chunk and bucket: call term, call count, put term, put count.
    std::vector<double> partial(chunks * (m + 1) * 4, 0.0);
    for_each_chunk(chunks, [&](std::size_t c) {
        std::vector<CompensatedSum> call_sum(m + 1), put_sum(m + 1);
        std::vector<double> call_cnt(m + 1, 0.0), put_cnt(m + 1, 0.0);
        const std::size_t end = std::min(x.size(), (c + 1) * kSampleChunk);
        for (std::size_t n = c * kSampleChunk; n < end; ++n) {
            const double e = std::exp(x[n]);
            const auto ub = static_cast<std::size_t>(std::upper_bound(k.begin(), k.end(), e) - k.begin());
            const auto lb = static_cast<std::size_t>(std::lower_bound(k.begin(), k.end(), e) - k.begin());
            call_sum[ub].add((dx[n] - rate) * e);
            call_cnt[ub] += 1.0;
            put_sum[lb].add((rate - dx[n]) * e);
            put_cnt[lb] += 1.0;
        }
        double* out = partial.data() + c * (m + 1) * 4;
        for (std::size_t b = 0; b <= m; ++b) {
            out[4 * b + 0] = call_sum[b].value();
            out[4 * b + 1] = call_cnt[b];
            out[4 * b + 2] = put_sum[b].value();
            out[4 * b + 3] = put_cnt[b];
        }
    });
    std::vector<CompensatedSum> call_sum(m + 1), put_sum(m + 1);
    std::vector<double> call_cnt(m + 1, 0.0), put_cnt(m + 1, 0.0);
    for (std::size_t c = 0; c < chunks; ++c) {
        const double* in = partial.data() + c * (m + 1) * 4;
        for (std::size_t b = 0; b <= m; ++b) {
            call_sum[b].add(in[4 * b + 0]);
            call_cnt[b] += in[4 * b + 1];
            put_sum[b].add(in[4 * b + 2]);
            put_cnt[b] += in[4 * b + 3];
        }
    }
    const double n = static_cast<double>(x.size());
    CalendarSlice slice{std::vector<double>(m), std::vector<double>(m)};
    // Call j takes buckets b > j; put j takes buckets b <= j.
    CompensatedSum tail;
    double tail_cnt = 0.0;
    for (std::size_t j = m; j-- > 0;) {
        tail.add(call_sum[j + 1].value());
        tail_cnt += call_cnt[j + 1];
        slice.call[j] = (tail.value() + rate * k[j] * tail_cnt) / n;
    }
    CompensatedSum head;
    double head_cnt = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        head.add(put_sum[j].value());
        head_cnt += put_cnt[j];
        slice.put[j] = (head.value() - rate * k[j] * head_cnt) / n;
    }
    return slice;
}

void calendar_slice_adjoint(std::span<const double> x, std::span<const double> dx,
                            std::span<const double> k, double rate, const CalendarSlice& slice,
                            double weight, std::span<double> adj_x, std::span<double> adj_dx) {
    const std::size_t m = k.size();
    // active_calls_below[b]: active call points j < b; active_puts_from[b]: active put points j >= b.
    std::vector<double> calls_below(m + 1, 0.0), puts_from(m + 1, 0.0);
    for (std::size_t j = 0; j < m; ++j) calls_below[j + 1] = calls_below[j] + (slice.call[j] < 0.0 ? 1.0 : 0.0);
    for (std::size_t j = m; j-- > 0;) puts_from[j] = puts_from[j + 1] + (slice.put[j] < 0.0 ? 1.0 : 0.0);
    if (calls_below[m] == 0.0 && puts_from[0] == 0.0) return;
    const double scale = weight / static_cast<double>(x.size());
    for_each_chunk(chunk_count(x.size()), [&](std::size_t c) {
        const std::size_t end = std::min(x.size(), (c + 1) * kSampleChunk);
        for (std::size_t n = c * kSampleChunk; n < end; ++n) {
            const double e = std::exp(x[n]);
            const auto ub = static_cast<std::size_t>(std::upper_bound(k.begin(), k.end(), e) - k.begin());
            const auto lb = static_cast<std::size_t>(std::lower_bound(k.begin(), k.end(), e) - k.begin());
            const double net = puts_from[lb] - calls_below[ub];
            adj_dx[n] += scale * net * e;
            adj_x[n] += scale * net * (dx[n] - rate) * e;
        }
    });
}

PenaltyReport total_penalty(const Model& model, const SyntheticGrid& grid, double spot,
                            const RateFn& rate_fn, const NormalSampleSet& samples) {
    if (grid.points.empty()) throw std::invalid_argument("empty synthetic grid");
    PenaltyReport report;
    report.points.resize(grid.points.size());
    std::map<double, std::vector<std::size_t>> by_tau;
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
        const auto& p = grid.points[i];
        if (!(p.tau > 0.0) || !(p.strike > 0.0)) throw std::invalid_argument("grid points need tau, K > 0");
        by_tau[p.tau].push_back(i);
        report.points[i].point = p;
    }
    const bool single_maturity = kind_of(model) == ModelKind::rn_q;
    for (const auto& [tau, idx] : by_tau) {
        const double r = rate_fn(tau);
        if (single_maturity) {
            const auto x = sample_log_returns(model, tau, r, samples);
            const double d = martingale_residual(x, r, tau);
            report.mu_taus.push_back(tau);
            report.mu_values.push_back(d * d);
            continue;
        }
        const auto paths = sample_log_return_paths(model, tau, r, samples);
        const double d = martingale_residual(paths.x, r, tau);
        report.mu_taus.push_back(tau);
        report.mu_values.push_back(d * d);
        std::vector<double> k;
        for (std::size_t i : idx) k.push_back(grid.points[i].strike / spot);
        std::sort(k.begin(), k.end());
        k.erase(std::unique(k.begin(), k.end()), k.end());
        const auto slice = calendar_slice(paths.x, paths.dx_dtau, k, r);
        for (std::size_t i : idx) {
            const auto& p = grid.points[i];
            const auto j = static_cast<std::size_t>(
                std::lower_bound(k.begin(), k.end(), p.strike / spot) - k.begin());
            report.points[i].value = p.side == OptionSide::call ? slice.call[j] : slice.put[j];
        }
    }
    summarize_penalty(report);
    return report;
}

void summarize_penalty(PenaltyReport& report) {
    std::vector<std::size_t> order(report.points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return canonical_less(report.points[a].point, report.points[b].point);
    });
    report.violations = 0;
    report.worst = 0.0;
    CompensatedSum calendar;
    for (std::size_t i : order) {
        const double v = report.points[i].value;
        if (v < 0.0) {
            calendar.add(-v);
            ++report.violations;
            report.worst = std::min(report.worst, v);
        }
    }
    CompensatedSum mu;
    for (double v : report.mu_values) mu.add(v);
    report.calendar_total = calendar.value();
    report.mu_total = mu.value();
    report.total = report.calendar_total + report.mu_total;
}

nlohmann::json to_json(const PenaltyReport& report) {
    nlohmann::json j;
    j["total"] = report.total;
    j["calendar_total"] = report.calendar_total;
    j["mu_total"] = report.mu_total;
    j["violations"] = report.violations;
    j["worst"] = report.worst;
    j["grid_points"] = report.points.size();
    auto& mu = j["mu_terms"] = nlohmann::json::array();
    for (std::size_t i = 0; i < report.mu_taus.size(); ++i) {
        mu.push_back({{"tau", report.mu_taus[i]}, {"value", report.mu_values[i]}});
    }
    return j;
}

// Surface audit ---------------------------------------------------------------

PriceSurface price_surface(const Model& model, std::span<const double> taus,
                           std::span<const double> strikes, double spot, const RateFn& rate_fn,
                           const NormalSampleSet& samples) {
    if (taus.empty() || strikes.empty()) throw std::invalid_argument("empty audit grid");
    if (!std::is_sorted(taus.begin(), taus.end()) || !std::is_sorted(strikes.begin(), strikes.end())) {
        throw std::invalid_argument("audit grids must be sorted");
    }
    PriceSurface s;
    s.taus.assign(taus.begin(), taus.end());
    s.strikes.assign(strikes.begin(), strikes.end());
    s.spot = spot;
    for (double tau : taus) {
        const double r = rate_fn(tau);
        const auto x = tau > 0.0 ? sample_log_returns(model, tau, r, samples) : std::vector<double>{};
        std::vector<double> calls, puts;
        for (double k : strikes) {
            calls.push_back(price_from_log_returns(x, {OptionSide::call, spot, k, tau, r}).price);
            puts.push_back(price_from_log_returns(x, {OptionSide::put, spot, k, tau, r}).price);
        }
        s.rates.push_back(r);
        s.calls.push_back(std::move(calls));
        s.puts.push_back(std::move(puts));
        s.residuals.push_back(tau > 0.0 ? martingale_residual(x, r, tau) : 0.0);
        s.far_call.push_back(price_from_log_returns(x, {OptionSide::call, spot, 1e6 * spot, tau, r}).price);
        s.near_zero_put.push_back(
            price_from_log_returns(x, {OptionSide::put, spot, 1e-12 * spot, tau, r}).price);
    }
    return s;
}

bool AuditReport::passed() const noexcept {
    return std::all_of(checks.begin(), checks.end(), [](const AuditCheck& c) { return c.passed; });
}

namespace {

class CheckBuilder {
public:
    explicit CheckBuilder(std::string name) { check_.name = std::move(name); }

    void violation(double tau, double strike, OptionSide side, double excess) {
        ++check_.violations;
        check_.violation_mass += excess;
        check_.offenders.push_back({tau, strike, side, excess});
    }

    AuditCheck finish(bool vacuous = false) {
        check_.vacuous = vacuous;
        check_.passed = check_.violations == 0;
        std::stable_sort(check_.offenders.begin(), check_.offenders.end(),
                         [](const AuditOffender& a, const AuditOffender& b) { return a.excess > b.excess; });
        if (check_.offenders.size() > 20) check_.offenders.resize(20);
        return std::move(check_);
    }

private:
    AuditCheck check_;
};

} // namespace

AuditReport audit_prices(const PriceSurface& s, bool maturity_structure, double tolerance,
                         GridSides calendar_sides) {
    AuditReport report;
    const double tol = tolerance < 0.0 ? 1e-10 * s.spot : tolerance;
    report.tolerance = tol;
    const std::size_t nt = s.taus.size();
    const std::size_t nk = s.strikes.size();
    const auto& K = s.strikes;

    CheckBuilder mono("strike_monotonicity");
    CheckBuilder convex("strike_convexity");
    for (std::size_t t = 0; t < nt; ++t) {
        for (std::size_t i = 0; i + 1 < nk; ++i) {
            const double dc = s.calls[t][i + 1] - s.calls[t][i];
            const double dp = s.puts[t][i] - s.puts[t][i + 1];
            if (dc > tol) mono.violation(s.taus[t], K[i + 1], OptionSide::call, dc);
            if (dp > tol) mono.violation(s.taus[t], K[i + 1], OptionSide::put, dp);
        }
        for (std::size_t i = 1; i + 1 < nk; ++i) {
            const double w = (K[i + 1] - K[i]) / (K[i + 1] - K[i - 1]);
            const double bc = w * s.calls[t][i - 1] + (1.0 - w) * s.calls[t][i + 1] - s.calls[t][i];
            const double bp = w * s.puts[t][i - 1] + (1.0 - w) * s.puts[t][i + 1] - s.puts[t][i];
            if (bc < -tol) convex.violation(s.taus[t], K[i], OptionSide::call, -bc);
            if (bp < -tol) convex.violation(s.taus[t], K[i], OptionSide::put, -bp);
        }
    }
    report.checks.push_back(mono.finish());
    report.checks.push_back(convex.finish());

    CheckBuilder limits("far_strike_limits");
    for (std::size_t t = 0; t < nt; ++t) {
        if (s.far_call[t] > tol) limits.violation(s.taus[t], 1e6 * s.spot, OptionSide::call, s.far_call[t]);
        if (s.near_zero_put[t] > tol) {
            limits.violation(s.taus[t], 1e-12 * s.spot, OptionSide::put, s.near_zero_put[t]);
        }
    }
    report.checks.push_back(limits.finish());

    CheckBuilder boundary("zero_maturity_intrinsic");
    bool has_zero = false;
    for (std::size_t t = 0; t < nt; ++t) {
        if (s.taus[t] != 0.0) continue;
        has_zero = true;
        for (std::size_t i = 0; i < nk; ++i) {
            const double ec = std::abs(s.calls[t][i] - intrinsic(OptionSide::call, s.spot, K[i]));
            const double ep = std::abs(s.puts[t][i] - intrinsic(OptionSide::put, s.spot, K[i]));
            if (ec > 0.0) boundary.violation(0.0, K[i], OptionSide::call, ec);
            if (ep > 0.0) boundary.violation(0.0, K[i], OptionSide::put, ep);
        }
    }
    report.checks.push_back(boundary.finish(!has_zero));

    CheckBuilder calendar("maturity_monotonicity");
    const bool calendar_applies = maturity_structure && nt >= 2;
    if (calendar_applies) {
        for (std::size_t t = 0; t + 1 < nt; ++t) {
            for (std::size_t i = 0; i < nk; ++i) {
                const double dc = s.calls[t][i] - s.calls[t + 1][i];
                const double dp = s.puts[t][i] - s.puts[t + 1][i];
                if (calendar_sides.calls && dc > tol) calendar.violation(s.taus[t + 1], K[i], OptionSide::call, dc);
                if (calendar_sides.puts && dp > tol) calendar.violation(s.taus[t + 1], K[i], OptionSide::put, dp);
            }
        }
    }
    report.checks.push_back(calendar.finish(!calendar_applies));

    CheckBuilder bounds("price_bounds");
    for (std::size_t t = 0; t < nt; ++t) {
        if (s.taus[t] == 0.0) continue;
        const double slack = s.spot * std::abs(std::expm1(s.residuals[t]));
        const double disc = std::exp(-s.rates[t] * s.taus[t]);
        for (std::size_t i = 0; i < nk; ++i) {
            const double c = s.calls[t][i];
            const double p = s.puts[t][i];
            const double c_lo = std::max(s.spot - K[i] * disc, 0.0) - slack - tol;
            const double c_hi = s.spot + slack + tol;
            const double p_lo = std::max(K[i] * disc - s.spot, 0.0) - slack - tol;
            const double p_hi = K[i] * disc + tol;
            if (c < c_lo) bounds.violation(s.taus[t], K[i], OptionSide::call, c_lo - c);
            if (c > c_hi) bounds.violation(s.taus[t], K[i], OptionSide::call, c - c_hi);
            if (p < p_lo) bounds.violation(s.taus[t], K[i], OptionSide::put, p_lo - p);
            if (p > p_hi) bounds.violation(s.taus[t], K[i], OptionSide::put, p - p_hi);
        }
    }
    report.checks.push_back(bounds.finish());
    return report;
}

AuditReport audit_surface(const Model& model, std::span<const double> taus,
                          std::span<const double> strikes, double spot, const RateFn& rate_fn,
                          const NormalSampleSet& samples, GridSides calendar_sides) {
    const auto surface = price_surface(model, taus, strikes, spot, rate_fn, samples);
    return audit_prices(surface, kind_of(model) != ModelKind::rn_q, -1.0, calendar_sides);
}

nlohmann::json to_json(const AuditReport& report) {
    nlohmann::json j;
    j["tolerance"] = report.tolerance;
    j["passed"] = report.passed();
    auto& checks = j["checks"] = nlohmann::json::array();
    for (const auto& c : report.checks) {
        nlohmann::json cj{{"name", c.name},
                          {"passed", c.passed},
                          {"vacuous", c.vacuous},
                          {"violations", c.violations},
                          {"violation_mass", c.violation_mass}};
        auto& off = cj["worst_offenders"] = nlohmann::json::array();
        for (const auto& o : c.offenders) {
            off.push_back({{"tau", o.tau}, {"strike", o.strike}, {"side", to_string(o.side)}, {"excess", o.excess}});
        }
        checks.push_back(std::move(cj));
    }
    return j;
}

} // namespace rngn
