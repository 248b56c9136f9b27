#include "rngn/heston.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rngn/error.hpp"
#include "rngn/parallel.hpp"

namespace rngn {

namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kDamping = 1.5;

// log(1 + w) / w, accurate for small |w|.
Complex log1p_ratio(Complex w) {
    if (std::abs(w) < 1e-8) return 1.0 - w / 2.0 + w * w / 3.0;
    const double a = w.real();
    const double b = w.imag();
    const Complex log1p{0.5 * std::log1p(2.0 * a + a * a + b * b), std::atan2(b, 1.0 + a)};
    return log1p / w;
}

// e^z - 1 without cancellation for small |z|.
Complex expm1(Complex z) {
    const double a = z.real();
    const double b = z.imag();
    const double half_sin = std::sin(0.5 * b);
    return {std::expm1(a) * std::cos(b) - 2.0 * half_sin * half_sin, std::exp(a) * std::sin(b)};
}

// 16-point Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
    std::array<double, 16> x{};
    std::array<double, 16> w{};

    GaussLegendre() {
        constexpr int n = 16;
        for (int i = 0; i < n; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = z;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (z * p1 - p0) / (z * z - 1.0);
                const double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            x[static_cast<std::size_t>(i)] = z;
            w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }
};

const GaussLegendre& gauss_legendre() {
    static const GaussLegendre gl;
    return gl;
}

template <class F>
double gl16(const F& f, double a, double b) {
    const auto& gl = gauss_legendre();
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double s = 0.0;
    for (std::size_t i = 0; i < 16; ++i) s += gl.w[i] * f(mid + half * gl.x[i]);
    return half * s;
}

template <class F>
double adaptive_gl(const F& f, double a, double b, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = gl16(f, a, m);
    const double right = gl16(f, m, b);
    if (std::abs(left + right - whole) <= tol) return left + right;
    if (depth == 0) throw NumericalError("Heston Fourier quadrature did not converge");
    return adaptive_gl(f, a, m, left, 0.5 * tol, depth - 1) + adaptive_gl(f, m, b, right, 0.5 * tol, depth - 1);
}

// Undiscounted-spot call price C / S as a function of k = ln(K / S).
double normalized_call(const HestonParams& p, double k, double tau, double rate) {
    const double a = kDamping;
    const double disc = std::exp(-rate * tau);
    const double front = std::exp(-a * k) / std::numbers::pi;
    auto psi = [&](double v) {
        const Complex u{v, -(a + 1.0)};
        const Complex denom{a * a + a - v * v, (2.0 * a + 1.0) * v};
        return disc * std::exp(heston_log_cf(p, u, tau, rate)) / denom;
    };
    auto integrand = [&](double v) { return (std::exp(Complex{0.0, -v * k}) * psi(v)).real(); };
    const double panel_tol = 1e-13;
    double total = 0.0;
    double lo = 0.0;
    while (true) {
        const double hi = lo + std::max(1.0, 0.25 * lo);
        total += adaptive_gl(integrand, lo, hi, gl16(integrand, lo, hi), panel_tol, 30);
        lo = hi;
        if (lo > 4.0) {
            const double tail = front * std::abs(psi(lo)) * lo;
            if (tail < 1e-14) break;
        }
        if (lo > 1e7) throw NumericalError("Heston Fourier integrand does not decay");
    }
    return front * total;
}

} // namespace

void HestonParams::validate() const {
    if (!(nu0 > 0.0) || !(vartheta > 0.0) || !(kappa > 0.0) || !(xi > 0.0) || !(rho > -1.0 && rho < 1.0)) {
        throw std::invalid_argument("Heston parameters need nu0, vartheta, kappa, xi > 0 and |rho| < 1");
    }
}

bool HestonParams::feller() const noexcept { return 2.0 * kappa * vartheta >= xi * xi; }

Complex heston_log_cf(const HestonParams& p, Complex u, double tau, double rate) {
    const double xi2 = p.xi * p.xi;
    const Complex iu = kI * u;
    const Complex q = iu + u * u;
    const Complex beta = p.kappa - p.rho * p.xi * iu;
    const Complex d = std::sqrt(beta * beta + xi2 * q);
    // s = beta + d and t = beta - d satisfy s t = -xi^2 q; the smaller one is
    // formed from the product to avoid cancellation.
    Complex s = beta + d;
    Complex t = beta - d;
    Complex t_over_xi2;
    if (std::abs(s) >= std::abs(t)) {
        t_over_xi2 = s == 0.0 ? Complex{} : -q / s;
        t = xi2 * t_over_xi2;
    } else {
        s = -xi2 * q / t;
        t_over_xi2 = t / xi2;
    }
    const Complex e = std::exp(-d * tau);
    const Complex one_minus_e = -expm1(-d * tau);
    const Complex ratio = std::abs(d * tau) < 1e-8 ? tau * (1.0 - 0.5 * d * tau) : one_minus_e / d;
    const Complex w = 0.5 * t * ratio;
    const Complex big_c = iu * rate * tau +
                          p.kappa * p.vartheta * t_over_xi2 * (tau - ratio * log1p_ratio(w));
    const Complex big_d = -q * one_minus_e / (s - t * e);
    const Complex out = big_c + big_d * p.nu0;
    if (!std::isfinite(out.real()) || !std::isfinite(out.imag())) {
        throw NumericalError("non-finite Heston characteristic exponent");
    }
    return out;
}

Complex heston_cf(const HestonParams& p, Complex u, double tau, double spot, double rate) {
    if (!(tau > 0.0)) throw std::invalid_argument("Heston CF needs tau > 0");
    return std::exp(heston_log_cf(p, u, tau, rate) + kI * u * std::log(spot));
}

double heston_price(const HestonParams& p, OptionSide side, double spot, double strike, double tau,
                    double rate) {
    p.validate();
    if (!(spot > 0.0) || !(strike >= 0.0)) throw std::invalid_argument("Heston price needs spot > 0, strike >= 0");
    if (tau == 0.0) return side == OptionSide::call ? std::max(spot - strike, 0.0) : std::max(strike - spot, 0.0);
    if (!(tau > 0.0)) throw std::invalid_argument("Heston price needs tau >= 0");
    const double disc = std::exp(-rate * tau);
    double call = 0.0;
    if (strike == 0.0) {
        call = spot * disc * std::exp(heston_log_cf(p, Complex{0.0, -1.0}, tau, rate)).real();
    } else {
        call = spot * normalized_call(p, std::log(strike / spot), tau, rate);
    }
    return side == OptionSide::call ? call : call - spot + strike * disc;
}

std::vector<double> heston_mc_log_returns(const HestonParams& p, double tau, double rate,
                                          std::size_t paths, std::size_t steps, std::uint64_t seed) {
    p.validate();
    if (paths < 1 || steps < 1) throw std::invalid_argument("Monte Carlo needs paths, steps >= 1");
    if (!(tau > 0.0)) throw std::invalid_argument("Monte Carlo needs tau > 0");
    std::vector<double> out(paths);
    const double dt = tau / static_cast<double>(steps);
    const double sq_dt = std::sqrt(dt);
    const double orth = std::sqrt(1.0 - p.rho * p.rho);
    for_each_chunk(chunk_count(paths), [&](std::size_t c) {
        std::vector<double> z(2 * steps);
        const std::size_t end = std::min(paths, (c + 1) * kSampleChunk);
        for (std::size_t i = c * kSampleChunk; i < end; ++i) {
            fill_standard_normal(seed, i + 1, 0, z);
            double x = 0.0;
            double v = p.nu0;
            for (std::size_t k = 0; k < steps; ++k) {
                const double vp = std::max(v, 0.0);
                const double root = std::sqrt(vp) * sq_dt;
                const double zv = z[2 * k];
                const double zs = p.rho * zv + orth * z[2 * k + 1];
                x += (rate - 0.5 * vp) * dt + root * zs;
                v += p.kappa * (p.vartheta - vp) * dt + p.xi * root * zv;
            }
            out[i] = x;
        }
    });
    return out;
}

PriceEstimate heston_mc_price(const HestonParams& p, OptionSide side, double spot, double strike,
                              double tau, double rate, std::size_t paths, std::size_t steps,
                              std::uint64_t seed) {
    const auto x = heston_mc_log_returns(p, tau, rate, paths, steps, seed);
    return price_from_log_returns(x, {side, spot, strike, tau, rate});
}

DensityEstimate heston_rnd(const HestonParams& p, double spot, double tau, double rate,
                           std::span<const double> strikes) {
    if (strikes.size() < 3 || !std::is_sorted(strikes.begin(), strikes.end())) {
        throw std::invalid_argument("density grid needs at least three sorted strikes");
    }
    const std::size_t n = strikes.size();
    std::vector<double> k(n + 2);
    k[0] = strikes[0] - (strikes[1] - strikes[0]);
    std::copy(strikes.begin(), strikes.end(), k.begin() + 1);
    k[n + 1] = strikes[n - 1] + (strikes[n - 1] - strikes[n - 2]);
    if (!(k[0] > 0.0)) k[0] = 0.0;
    std::vector<double> c(n + 2);
    for (std::size_t i = 0; i < n + 2; ++i) c[i] = heston_price(p, OptionSide::call, spot, k[i], tau, rate);
    DensityEstimate est;
    est.variable = DensityVariable::terminal_price;
    est.grid.assign(strikes.begin(), strikes.end());
    est.values.resize(n);
    const double growth = std::exp(rate * tau);
    double negative = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        const double hl = k[i] - k[i - 1];
        const double hr = k[i + 1] - k[i];
        const double second = 2.0 * ((c[i + 1] - c[i]) / hr - (c[i] - c[i - 1]) / hl) / (hl + hr);
        const double f = growth * second;
        if (f < 0.0) negative += -f * 0.5 * (hl + hr);
        est.values[i - 1] = std::max(f, 0.0);
    }
    if (negative > 1e-4) throw NumericalError("strike grid too coarse for the density (negative mass)");
    return est;
}

HestonMoments heston_true_moments(const HestonParams& p, double tau, double rate) {
    p.validate();
    if (!(tau > 0.0)) throw std::invalid_argument("moments need tau > 0");
    // K(s) = ln E[e^{sX}] = log_cf(-i s); kappa_n = n! [s^n] K.
    auto cumulants = [&](double radius) {
        constexpr int m = 64;
        std::array<double, 5> out{};
        for (int j = 0; j < m; ++j) {
            const double theta = 2.0 * std::numbers::pi * j / m;
            const Complex s = radius * std::exp(kI * theta);
            const Complex k = heston_log_cf(p, -kI * s, tau, rate);
            for (int n = 1; n <= 4; ++n) out[static_cast<std::size_t>(n)] += (k * std::exp(-kI * (n * theta))).real();
        }
        const std::array<double, 5> factorial{1.0, 1.0, 2.0, 6.0, 24.0};
        for (int n = 1; n <= 4; ++n) {
            out[static_cast<std::size_t>(n)] *= factorial[static_cast<std::size_t>(n)] / (m * std::pow(radius, n));
        }
        return out;
    };
    auto to_moments = [](const std::array<double, 5>& k) {
        return HestonMoments{k[1], k[2], k[3] / std::pow(k[2], 1.5), 3.0 + k[4] / (k[2] * k[2])};
    };
    const auto a = to_moments(cumulants(0.25));
    const auto b = to_moments(cumulants(0.125));
    if (!(a.variance > 0.0) || std::abs(a.variance - b.variance) > 1e-8 * a.variance ||
        std::abs(a.skewness - b.skewness) > 1e-6 || std::abs(a.kurtosis - b.kurtosis) > 1e-5) {
        throw NumericalError("Heston cumulant extraction is unstable for these parameters");
    }
    return a;
}

const std::vector<std::string>& heston_scenario_names() {
    static const std::vector<std::string> names{"left-skew", "likely-normal", "right-skew", "long-maturity"};
    return names;
}

std::vector<double> default_strike_grid() {
    std::vector<double> k;
    for (int s = 400; s <= 1600; s += 20) k.push_back(s);
    return k;
}

HestonScenario heston_scenario(std::string_view name) {
    HestonScenario sc;
    sc.name = std::string(name);
    sc.strikes = default_strike_grid();
    sc.params = {0.05, 0.25, 0.15, 0.35, -0.9};
    if (name == "left-skew") return sc;
    if (name == "likely-normal") {
        sc.params.xi = 0.25;
        sc.params.rho = -0.2;
        return sc;
    }
    if (name == "right-skew") {
        sc.params.xi = 0.2;
        sc.params.rho = 0.85;
        return sc;
    }
    if (name == "long-maturity") {
        sc.taus = {2.0};
        return sc;
    }
    throw DataError("unknown scenario '" + std::string(name) +
                    "' (expected left-skew, likely-normal, right-skew or long-maturity)");
}

OptionChain generate_simulated_chain(const HestonScenario& sc) {
    sc.params.validate();
    OptionChain chain;
    chain.observation_date = "simulated";
    chain.spot = sc.spot;
    chain.rate_curve = {{1.0, sc.rate}};
    for (double tau : sc.taus) {
        for (double k : sc.strikes) {
            // Quadrature noise can leave far out-of-the-money prices a hair below zero.
            const double price = std::max(0.0, heston_price(sc.params, OptionSide::call, sc.spot, k, tau, sc.rate));
            chain.quotes.push_back(make_quote(OptionSide::call, k, tau * 365.0, price, price));
        }
    }
    return chain;
}

} // namespace rngn
