#include "rngn/data_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rngn/error.hpp"

namespace rngn {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                 : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        const auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos
                                                                          : nl - start);
        lines.push_back(line);
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return lines;
}

double parse_number(std::string_view field, std::string_view column, std::size_t line_no) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw DataError("line " + std::to_string(line_no) + ": non-numeric " + std::string(column) +
                        " '" + std::string(field) + "'");
    }
    return value;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_double(double x) {
    std::array<char, 40> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", x);
    return buf.data();
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::string_view to_string(OptionSide side) noexcept { return side == OptionSide::call ? "call" : "put"; }

OptionSide parse_side(std::string_view text) {
    const std::string s = lower(trim(text));
    if (s == "call" || s == "c") return OptionSide::call;
    if (s == "put" || s == "p") return OptionSide::put;
    throw DataError("unknown option side '" + std::string(text) + "'");
}

OptionQuote make_quote(OptionSide side, double strike, double days, double bid, double ask) {
    OptionQuote q;
    q.side = side;
    q.strike = strike;
    q.days = days;
    q.tau = days / 365.0;
    q.bid = bid;
    q.ask = ask;
    q.mid = 0.5 * (bid + ask);
    return q;
}

double interpolate_rate(const std::vector<RatePoint>& curve, double tau) {
    if (curve.empty()) throw std::invalid_argument("empty rate curve");
    const double days = tau * 365.0;
    if (days <= curve.front().tenor_days) return curve.front().rate;
    if (days >= curve.back().tenor_days) return curve.back().rate;
    const auto hi = std::upper_bound(curve.begin(), curve.end(), days,
                                     [](double d, const RatePoint& p) { return d < p.tenor_days; });
    const auto lo = hi - 1;
    if (days == lo->tenor_days) return lo->rate;
    const double w = (days - lo->tenor_days) / (hi->tenor_days - lo->tenor_days);
    return lo->rate + w * (hi->rate - lo->rate);
}

double OptionChain::rate_at(double tau) const { return interpolate_rate(rate_curve, tau); }

std::vector<double> OptionChain::maturities() const {
    std::vector<double> out;
    for (const auto& q : quotes) out.push_back(q.tau);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> OptionChain::strikes() const {
    std::vector<double> out;
    for (const auto& q : quotes) out.push_back(q.strike);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> OptionChain::mid_prices() const {
    std::vector<double> out;
    out.reserve(quotes.size());
    for (const auto& q : quotes) out.push_back(q.mid);
    return out;
}

std::vector<RatePoint> parse_rates(std::string_view text) {
    std::vector<RatePoint> curve;
    bool header_seen = false;
    std::size_t tenor_col = 0, rate_col = 1;
    std::size_t line_no = 0;
    for (auto raw : split_lines(text)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split_fields(line);
        if (!header_seen) {
            header_seen = true;
            const auto it_t = std::find(fields.begin(), fields.end(), "tenor_days");
            const auto it_r = std::find(fields.begin(), fields.end(), "rate");
            if (it_t == fields.end() || it_r == fields.end()) {
                throw DataError("rates CSV needs header columns tenor_days,rate");
            }
            tenor_col = static_cast<std::size_t>(it_t - fields.begin());
            rate_col = static_cast<std::size_t>(it_r - fields.begin());
            continue;
        }
        if (fields.size() <= std::max(tenor_col, rate_col)) {
            throw DataError("line " + std::to_string(line_no) + ": missing columns");
        }
        curve.push_back({parse_number(fields[tenor_col], "tenor_days", line_no),
                         parse_number(fields[rate_col], "rate", line_no)});
    }
    if (curve.empty()) throw DataError("rates CSV has no rows");
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (!(curve[i].tenor_days > curve[i - 1].tenor_days)) {
            throw DataError("rate curve tenors must be strictly increasing");
        }
    }
    return curve;
}

std::vector<RatePoint> load_rates(const std::filesystem::path& path) { return parse_rates(read_file(path)); }

OptionChain parse_chain(std::string_view text, const LoadOptions& options, LoadReport* report) {
    static constexpr std::array<std::string_view, 6> kColumns{"date", "side", "strike", "days", "bid", "ask"};
    OptionChain chain;
    LoadReport rep;
    std::optional<double> spot = options.spot;
    std::array<std::size_t, kColumns.size()> col{};
    bool header_seen = false;
    std::size_t line_no = 0;

    struct Row {
        OptionQuote quote;
        std::size_t line_no;
    };
    std::vector<Row> rows;

    for (auto raw : split_lines(text)) {
        ++line_no;
        auto line = trim(raw);
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto body = trim(line.substr(1));
            if (body.starts_with("spot=") && !options.spot) {
                spot = parse_number(trim(body.substr(5)), "spot", line_no);
            }
            continue;
        }
        const auto fields = split_fields(line);
        if (!header_seen) {
            header_seen = true;
            for (std::size_t c = 0; c < kColumns.size(); ++c) {
                const auto it = std::find(fields.begin(), fields.end(), kColumns[c]);
                if (it == fields.end()) throw DataError("missing column '" + std::string(kColumns[c]) + "'");
                col[c] = static_cast<std::size_t>(it - fields.begin());
            }
            continue;
        }
        if (fields.size() < kColumns.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected 6 fields");
        }
        ++rep.rows;
        if (chain.observation_date.empty()) chain.observation_date = std::string(fields[col[0]]);
        const OptionSide side = parse_side(fields[col[1]]);
        const double strike = parse_number(fields[col[2]], "strike", line_no);
        const double days = parse_number(fields[col[3]], "days", line_no);
        const double bid = parse_number(fields[col[4]], "bid", line_no);
        const double ask = parse_number(fields[col[5]], "ask", line_no);
        if (!(strike > 0.0)) throw DataError("line " + std::to_string(line_no) + ": strike must be positive");
        if (!(days > 0.0)) throw DataError("line " + std::to_string(line_no) + ": days must be positive");
        if (bid < 0.0 || ask < 0.0) throw DataError("line " + std::to_string(line_no) + ": negative price");
        rows.push_back({make_quote(side, strike, days, bid, ask), line_no});
    }
    if (!header_seen) throw DataError("chain CSV has no header");
    if (!spot || !(*spot > 0.0)) throw DataError("spot price missing: pass --spot or add a #spot=<value> line");
    chain.spot = *spot;

    for (const auto& row : rows) {
        const auto& q = row.quote;
        if (q.bid < options.min_price || q.ask < options.min_price) {
            ++rep.dropped_low_price;
            continue;
        }
        if (q.ask < q.bid) {
            ++rep.dropped_crossed;
            continue;
        }
        const double cap = q.side == OptionSide::call ? chain.spot : q.strike;
        if (!(q.mid < cap)) {
            ++rep.dropped_sanity;
            continue;
        }
        chain.quotes.push_back(q);
    }
    if (chain.quotes.empty()) throw DataError("no quotes left after filtering");

    if (options.rates_path) {
        chain.rate_curve = load_rates(*options.rates_path);
    } else if (options.flat_rate) {
        chain.rate_curve = {{1.0, *options.flat_rate}};
    }
    if (report) *report = rep;
    return chain;
}

OptionChain load_chain(const std::filesystem::path& path, const LoadOptions& options, LoadReport* report) {
    return parse_chain(read_file(path), options, report);
}

std::string format_chain(const OptionChain& chain) {
    std::string out = "#spot=" + format_double(chain.spot) + "\n";
    out += "date,side,strike,days,bid,ask\n";
    for (const auto& q : chain.quotes) {
        out += chain.observation_date;
        out += ',';
        out += to_string(q.side);
        out += ',' + format_double(q.strike) + ',' + format_double(q.days) + ',' + format_double(q.bid) +
               ',' + format_double(q.ask) + '\n';
    }
    return out;
}

std::string format_rates(const std::vector<RatePoint>& curve) {
    std::string out = "tenor_days,rate\n";
    for (const auto& p : curve) out += format_double(p.tenor_days) + ',' + format_double(p.rate) + '\n';
    return out;
}

void write_chain(const OptionChain& chain, const std::filesystem::path& chain_path,
                 const std::optional<std::filesystem::path>& rates_path) {
    {
        std::ofstream out(chain_path, std::ios::binary);
        if (!out) throw DataError("cannot write " + chain_path.string());
        out << format_chain(chain);
    }
    if (rates_path) {
        std::ofstream out(*rates_path, std::ios::binary);
        if (!out) throw DataError("cannot write " + rates_path->string());
        out << format_rates(chain.rate_curve);
    }
}

OptionChain with_quotes(const OptionChain& chain, std::vector<OptionQuote> quotes) {
    OptionChain out;
    out.observation_date = chain.observation_date;
    out.spot = chain.spot;
    out.rate_curve = chain.rate_curve;
    out.quotes = std::move(quotes);
    return out;
}

SplitChains split_train_test(const OptionChain& chain) {
    std::map<std::pair<double, int>, std::vector<std::size_t>> groups;
    std::vector<OptionQuote> extreme;
    for (std::size_t i = 0; i < chain.quotes.size(); ++i) {
        const auto& q = chain.quotes[i];
        const double moneyness = q.strike / chain.spot;
        if (moneyness >= 0.8 && moneyness <= 1.2) {
            groups[{q.days, static_cast<int>(q.side)}].push_back(i);
        } else {
            extreme.push_back(q);
        }
    }
    std::vector<OptionQuote> train, test;
    for (auto& [key, idx] : groups) {
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return chain.quotes[a].strike < chain.quotes[b].strike;
        });
        for (std::size_t k = 0; k < idx.size(); ++k) {
            // 1-based numbering: the first (lowest) strike is odd and trains.
            (k % 2 == 0 ? train : test).push_back(chain.quotes[idx[k]]);
        }
    }
    return {with_quotes(chain, std::move(train)), with_quotes(chain, std::move(test)),
            with_quotes(chain, std::move(extreme))};
}

} // namespace rngn
