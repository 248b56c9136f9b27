#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rngn/data_io.hpp"
#include "rngn/error.hpp"

using namespace rngn;

namespace {

const char* kChain =
    "#spot=100\n"
    "date,side,strike,days,bid,ask\n"
    "2024-01-02,call,90,30,10.5,11.0\n"
    "2024-01-02,call,95,30,6.0,6.5\n"
    "2024-01-02,call,100,30,1.0,1.5\n"
    "2024-01-02,call,105,30,0.5,0.7\n"
    "2024-01-02,call,110,30,0.1,0.2\n"
    "2024-01-02,put,79,30,0.03,0.05\n"
    "2024-01-02,put,80,30,0.04,0.06\n"
    "2024-01-02,put,100,365,5.0,6.0\n";

} // namespace

TEST_SUITE("data_io") {

TEST_CASE("quotes derive mid and tau") {
    const auto q = make_quote(OptionSide::call, 100.0, 365.0, 1.0, 1.5);
    CHECK(q.mid == 1.25);
    CHECK(q.tau == 1.0);
    CHECK(parse_side("C") == OptionSide::call);
    CHECK(parse_side("Put") == OptionSide::put);
    CHECK_THROWS_AS(parse_side("straddle"), DataError);
}

TEST_CASE("parse a chain with a spot comment") {
    LoadReport report;
    const auto chain = parse_chain(kChain, {}, &report);
    CHECK(chain.spot == 100.0);
    CHECK(chain.observation_date == "2024-01-02");
    CHECK(chain.quotes.size() == 8);
    CHECK(report.rows == 8);
    CHECK(chain.maturities().size() == 2);
    CHECK(chain.strikes().front() == 79.0);
    LoadOptions opt;
    opt.spot = 101.0;
    CHECK(parse_chain(kChain, opt).spot == 101.0);
}

TEST_CASE("low prices are dropped") {
    std::string text = kChain;
    text += "2024-01-02,put,85,30,0.02,0.5\n";
    LoadReport report;
    const auto chain = parse_chain(text, {}, &report);
    CHECK(report.dropped_low_price == 1);
    CHECK(chain.quotes.size() == 8);
}

TEST_CASE("crossed and insane quotes are dropped") {
    std::string text = kChain;
    text += "2024-01-02,call,120,30,0.5,0.4\n";
    text += "2024-01-02,call,50,30,120,121\n";
    text += "2024-01-02,put,60,30,70,71\n";
    LoadReport report;
    const auto chain = parse_chain(text, {}, &report);
    CHECK(report.dropped_crossed == 1);
    CHECK(report.dropped_sanity == 2);
    CHECK(chain.quotes.size() == 8);
}

TEST_CASE("malformed input is reported") {
    CHECK_THROWS_AS(parse_chain("#spot=100\ndate,side,strike,days,bid\nd,call,1,1,1\n"), DataError);
    CHECK_THROWS_AS(parse_chain("#spot=100\ndate,side,strike,days,bid,ask\nd,call,abc,1,1,2\n"), DataError);
    CHECK_THROWS_AS(parse_chain("date,side,strike,days,bid,ask\nd,call,100,30,1,2\n"), DataError);
    CHECK_THROWS_AS(parse_chain("#spot=100\ndate,side,strike,days,bid,ask\nd,call,100,30,0.01,0.01\n"), DataError);
    CHECK_THROWS_AS(parse_chain("#spot=100\ndate,side,strike,days,bid,ask\n"), DataError);
    CHECK_THROWS_AS(parse_chain("#spot=100\ndate,side,strike,days,bid,ask\nd,call,100,0,1,2\n"), DataError);
}

TEST_CASE("columns are found by name and CRLF is accepted") {
    const auto chain = parse_chain("#spot=100\r\nside,date,days,strike,ask,bid\r\ncall,d,30,100,1.5,1.0\r\n");
    REQUIRE(chain.quotes.size() == 1);
    CHECK(chain.quotes[0].strike == 100.0);
    CHECK(chain.quotes[0].bid == 1.0);
    CHECK(chain.quotes[0].mid == 1.25);
}

TEST_CASE("rate interpolation") {
    const std::vector<RatePoint> curve{{30.0, 0.02}, {90.0, 0.04}};
    CHECK(interpolate_rate(curve, 60.0 / 365.0) == doctest::Approx(0.03).epsilon(1e-14));
    CHECK(interpolate_rate(curve, 1.0 / 365.0) == 0.02);
    CHECK(interpolate_rate(curve, 2.0) == 0.04);
    CHECK(interpolate_rate(curve, 30.0 / 365.0) == doctest::Approx(0.02).epsilon(1e-14));
    CHECK_THROWS_AS(interpolate_rate({}, 0.1), std::invalid_argument);
    double prev = 0.0;
    for (double d = 1.0; d < 120.0; d += 0.5) {
        const double r = interpolate_rate(curve, d / 365.0);
        CHECK(r >= prev);
        prev = r;
    }
    CHECK(parse_rates("tenor_days,rate\n30,0.02\n90,0.04\n") == curve);
    CHECK_THROWS_AS(parse_rates("tenor_days,rate\n90,0.02\n30,0.04\n"), DataError);
}

TEST_CASE("odd/even split within each maturity and side") {
    const auto chain = parse_chain(kChain);
    const auto split = split_train_test(chain);
    std::vector<double> train_calls, test_calls;
    for (const auto& q : split.train.quotes) if (q.side == OptionSide::call) train_calls.push_back(q.strike);
    for (const auto& q : split.test.quotes) if (q.side == OptionSide::call) test_calls.push_back(q.strike);
    CHECK(train_calls == std::vector<double>{90, 100, 110});
    CHECK(test_calls == std::vector<double>{95, 105});
    REQUIRE(split.extreme.quotes.size() == 1);
    CHECK(split.extreme.quotes[0].strike == 79.0);
    bool band_edge_in_train = false;
    for (const auto& q : split.train.quotes) band_edge_in_train |= q.strike == 80.0;
    CHECK(band_edge_in_train);
    CHECK(split.train.quotes.size() + split.test.quotes.size() + split.extreme.quotes.size() == chain.quotes.size());
    CHECK(split.train.spot == chain.spot);
}

TEST_CASE("serialization round-trips") {
    LoadOptions opt;
    opt.flat_rate = 0.03;
    const auto chain = parse_chain(kChain, opt);
    CHECK(chain.rate_at(0.5) == 0.03);
    const auto again = parse_chain(format_chain(chain), opt);
    CHECK(again == chain);

    const auto dir = std::filesystem::temp_directory_path() / "rngn_data_io_test";
    std::filesystem::create_directories(dir);
    OptionChain curved = chain;
    curved.rate_curve = {{30.0, 0.02}, {365.0, 0.045}};
    write_chain(curved, dir / "chain.csv", dir / "rates.csv");
    LoadOptions from_file;
    from_file.rates_path = dir / "rates.csv";
    CHECK(load_chain(dir / "chain.csv", from_file) == curved);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(load_chain(dir / "missing.csv"), DataError);
}

} // TEST_SUITE
