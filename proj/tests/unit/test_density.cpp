#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "rngn/density.hpp"
#include "rngn/error.hpp"
#include "rngn/heston.hpp"

using namespace rngn;

namespace {

template <class V>
bool monotone(const V& v) {
    bool up = true, down = true;
    for (std::size_t i = 1; i < v.size(); ++i) {
        up &= v[i] >= v[i - 1];
        down &= v[i] <= v[i - 1];
    }
    return up || down;
}

} // namespace

TEST_SUITE("density") {

TEST_CASE("KDE of a Gaussian model recovers the normal density") {
    const auto s = draw_standard_normal(1'000'000, 1);
    const double r = 0.04, tau = 0.25, sigma = 0.1;
    RnQParams p{0.0, sigma, 1.0, 1.0, 4.0};
    p.mu = rnq_mu_from_constraint(sigma, 1.0, 1.0, 4.0, s, r, tau);
    const double sd = 1.5 * sigma;
    std::vector<double> grid;
    for (double x = p.mu - 5 * sd; x <= p.mu + 5 * sd; x += sd / 40) grid.push_back(x);
    const auto est = kde_log_return(p, tau, r, s, grid);
    const double peak = oracle::normal_pdf(0.0) / sd;
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        worst = std::max(worst, std::abs(est.values[i] - oracle::normal_pdf((grid[i] - p.mu) / sd) / sd));
    CHECK(worst < 0.02 * peak);
    CHECK(est.bandwidth > 0.0);
    CHECK(est.variable == DensityVariable::log_return);
}

TEST_CASE("KDE normalization and translation") {
    const auto s = draw_standard_normal(200'000, 2);
    const auto grid = sample_grid(s.values);
    CHECK(grid.size() == 401);
    const auto est = kde(s.values, grid);
    CHECK(est.integral() == doctest::Approx(1.0).epsilon(0.01));
    for (double v : est.values) CHECK(v >= 0.0);

    std::vector<double> shifted = s.values;
    for (double& v : shifted) v += 0.37;
    std::vector<double> shifted_grid = grid;
    for (double& g : shifted_grid) g += 0.37;
    const auto moved = kde(shifted, shifted_grid);
    const auto mode = [](const DensityEstimate& d) {
        return d.grid[static_cast<std::size_t>(std::max_element(d.values.begin(), d.values.end()) - d.values.begin())];
    };
    CHECK(std::abs(mode(moved) - mode(est) - 0.37) <= grid[1] - grid[0] + 1e-12);

    const std::vector<double> flat(500, 1.0);
    CHECK_THROWS_AS(kde(flat, grid), NumericalError);
}

TEST_CASE("price density change of variables") {
    DensityEstimate q;
    const double sd = 0.2, mean = 0.01;
    for (double x = mean - 8 * sd; x <= mean + 8 * sd; x += sd / 100) {
        q.grid.push_back(x);
        q.values.push_back(oracle::normal_pdf((x - mean) / sd) / sd);
    }
    const double spot = 1.0;
    const auto f = price_density(q, spot);
    CHECK(f.variable == DensityVariable::terminal_price);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.grid.size(); ++i)
        worst = std::max(worst, std::abs(f.values[i] - oracle::lognormal_pdf(f.grid[i], std::log(spot) + mean, sd)));
    CHECK(worst < 1e-3);
    CHECK(f.integral() == doctest::Approx(q.integral()).epsilon(0.005));
    const auto mode_f = f.grid[static_cast<std::size_t>(std::max_element(f.values.begin(), f.values.end()) - f.values.begin())];
    CHECK(mode_f < spot * std::exp(mean));
}

TEST_CASE("characteristics of a large normal sample") {
    const auto s = draw_standard_normal(1'000'000, 3);
    const auto c = characteristics(s.values);
    CHECK(std::abs(c.skewness) < 0.02);
    CHECK(std::abs(c.kurtosis - 3.0) < 0.05);
    CHECK(std::abs(c.skew_pm) < 0.01);
    CHECK(std::abs(c.skew_am - 1.0) < 0.02);
    CHECK(c.x01 == doctest::Approx(-2.3263).epsilon(0.01));
    CHECK(c.x95 == doctest::Approx(1.6449).epsilon(0.01));
    CHECK(c.x01 <= c.x05);
    CHECK(c.x05 <= c.x95);
    CHECK(c.x95 <= c.x99);
    CHECK(characteristic_names().size() == 10);
    CHECK(characteristic_values(c).size() == 10);
}

TEST_CASE("symmetric samples have exactly zero skew") {
    const auto s = draw_standard_normal(1001, 4);
    std::vector<double> sym;
    for (double z : s.values) {
        sym.push_back(z);
        sym.push_back(-z);
    }
    const auto c = characteristics(sym);
    CHECK(std::abs(c.skewness) < 1e-12);
    CHECK(std::abs(c.skew_pm) < 1e-12);
    CHECK(c.skew_am == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("affine and permutation invariance") {
    const auto s = draw_standard_normal(10'000, 5);
    std::vector<double> x;
    for (double z : s.values) x.push_back(std::exp(0.3 * z));
    const auto c = characteristics(x);
    std::vector<double> y;
    for (double v : x) y.push_back(2.5 * v - 4.0);
    const auto d = characteristics(y);
    CHECK(d.skewness == doctest::Approx(c.skewness).epsilon(1e-10));
    CHECK(d.kurtosis == doctest::Approx(c.kurtosis).epsilon(1e-10));
    CHECK(d.skew_pm == doctest::Approx(c.skew_pm).epsilon(1e-10));
    CHECK(d.skew_am == doctest::Approx(c.skew_am).epsilon(1e-10));
    CHECK(d.mean == doctest::Approx(2.5 * c.mean - 4.0).epsilon(1e-12));
    CHECK(d.std == doctest::Approx(2.5 * c.std).epsilon(1e-12));
    CHECK(d.x05 == doctest::Approx(2.5 * c.x05 - 4.0).epsilon(1e-12));

    std::vector<double> z = x;
    std::reverse(z.begin(), z.end());
    std::rotate(z.begin(), z.begin() + 1234, z.end());
    const auto e = characteristics(z);
    CHECK(e.x99 == c.x99);
    CHECK(e.skew_am == c.skew_am);
    CHECK(e.kurtosis == doctest::Approx(c.kurtosis).epsilon(1e-13));

    CHECK_THROWS_AS(characteristics(std::vector<double>(50, 1.0)), std::invalid_argument);
}

TEST_CASE("quantile convention") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 1.0) == 4.0);
    // (k - 1/3) / (n + 1/3) at k = 2 is 5/13
    CHECK(quantile_sorted(v, 5.0 / 13.0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("risk-neutral moments of a Gaussian model") {
    const auto s = draw_standard_normal(1'000'000, 6);
    const Model m = make_zero_rnmlp(0.2);
    const auto a = risk_neutral_moments(m, 0.25, 0.04, s);
    CHECK(a.rnm2 == doctest::Approx(0.1).epsilon(0.005));
    CHECK(std::abs(a.rnm3) < 0.02);
    CHECK(std::abs(a.rnm4 - 3.0) < 0.05);
    const auto b = risk_neutral_moments(m, 1.0, 0.04, s);
    CHECK(b.rnm2 / a.rnm2 == doctest::Approx(2.0).epsilon(1e-12));

    const auto x = sample_log_returns(m, 0.25, 0.04, s);
    CHECK(characteristics(x).std == a.rnm2);
}

TEST_CASE("term structures") {
    const auto s = draw_standard_normal(100'000, 7);
    const Model m = make_zero_rnmlp(0.2);
    const auto taus = parse_tau_list("1w,1m,3m,6m,1y");
    REQUIRE(taus.size() == 5);
    CHECK(taus[0] == doctest::Approx(7.0 / 365.0));
    CHECK(taus[4] == 1.0);
    const auto rows = term_structure(m, taus, [](double) { return 0.04; }, s);
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].moments.rnm2 > rows[i - 1].moments.rnm2);
        CHECK(std::abs(rows[i].moments.rnm3) < 0.05);
        CHECK(std::abs(rows[i].moments.rnm4 - 3.0) < 0.1);
    }
    const std::vector<double> one{0.5};
    CHECK(term_structure(m, one, [](double) { return 0.04; }, s).size() == 1);
    const auto csv = format_term_structure_csv(rows);
    CHECK(csv.rfind("tau,rnm2,rnm3,rnm4\n", 0) == 0);

    const auto sc = heston_scenario("left-skew");
    std::vector<double> sd, skew, kurt;
    for (double tau : taus) {
        const auto h = heston_true_moments(sc.params, tau, sc.rate);
        sd.push_back(std::sqrt(h.variance));
        skew.push_back(h.skewness);
        kurt.push_back(h.kurtosis);
    }
    CHECK(monotone(sd));
    CHECK(monotone(skew));
    CHECK(monotone(kurt));
}

TEST_CASE("maturity labels") {
    CHECK(parse_tau_label("30d") == doctest::Approx(30.0 / 365.0));
    CHECK(parse_tau_label("2w") == doctest::Approx(14.0 / 365.0));
    CHECK(parse_tau_label("6m") == doctest::Approx(0.5));
    CHECK(parse_tau_label("2y") == 2.0);
    CHECK(parse_tau_label("0.25") == 0.25);
    CHECK_THROWS_AS(parse_tau_label("abc"), std::invalid_argument);
    CHECK_THROWS_AS(parse_tau_label("-1m"), std::invalid_argument);
}

TEST_CASE("density CSV") {
    DensityEstimate d;
    d.grid = {0.0, 1.0};
    d.values = {0.5, 0.25};
    CHECK(format_density_csv(d) == "grid,value\n0,0.5\n1,0.25\n");
}

} // TEST_SUITE
