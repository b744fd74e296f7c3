#include "cnntrade/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cnntrade {

namespace {

double parse_number(std::string_view s, const char* field, std::size_t line) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::runtime_error("line " + std::to_string(line) + ": bad " + field +
                                 " value '" + std::string(s) + "'");
    }
    return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

void append_double(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

}  // namespace

std::optional<std::string> PriceBar::violation() const {
    if (!date.valid()) return "invalid date";
    if (!(open > 0) || !(high > 0) || !(low > 0) || !(close > 0)) {
        return "non-positive price";
    }
    if (volume < 0) return "negative volume";
    if (low > std::min(open, close)) return "low above min(open, close)";
    if (high < std::max(open, close)) return "high below max(open, close)";
    return std::nullopt;
}

std::optional<std::size_t> PriceSeries::index_of(const Date& d) const {
    auto it = std::lower_bound(bars.begin(), bars.end(), d,
                               [](const PriceBar& b, const Date& x) { return b.date < x; });
    if (it == bars.end() || it->date != d) return std::nullopt;
    return static_cast<std::size_t>(it - bars.begin());
}

const PriceBar& PriceSeries::at(const Date& d) const {
    auto idx = index_of(d);
    if (!idx) {
        throw std::runtime_error("no bar for date " + d.to_string() +
                                 (ticker.empty() ? "" : " in " + ticker));
    }
    return bars[*idx];
}

void SplitSpec::validate() const {
    for (const Date* d : {&train_start, &train_end, &test_start, &test_end}) {
        if (!d->valid()) throw std::invalid_argument("split spec contains invalid date");
    }
    if (train_end < train_start) throw std::invalid_argument("train_end before train_start");
    if (test_end < test_start) throw std::invalid_argument("test_end before test_start");
    if (!(train_end < test_start)) {
        throw std::invalid_argument("train_end must precede test_start");
    }
}

PriceSeries parse_ohlcv_csv(std::istream& in, std::string ticker) {
    PriceSeries series;
    series.ticker = std::move(ticker);

    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("empty input" +
                                 (series.ticker.empty() ? "" : " for " + series.ticker));
    }
    std::string header(trim(line));
    std::transform(header.begin(), header.end(), header.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (header != "date,open,high,low,close,volume") {
        throw std::runtime_error("line 1: expected header 'date,open,high,low,close,volume'");
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view row = trim(line);
        if (row.empty()) continue;
        auto fields = split_fields(row);
        if (fields.size() != 6) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 6 fields, got " +
                                     std::to_string(fields.size()));
        }
        PriceBar bar;
        try {
            bar.date = Date::parse(trim(fields[0]));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        bar.open = parse_number(trim(fields[1]), "open", line_no);
        bar.high = parse_number(trim(fields[2]), "high", line_no);
        bar.low = parse_number(trim(fields[3]), "low", line_no);
        bar.close = parse_number(trim(fields[4]), "close", line_no);
        bar.volume = parse_number(trim(fields[5]), "volume", line_no);
        if (auto why = bar.violation()) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + *why);
        }
        series.bars.push_back(bar);
    }
    if (series.bars.empty()) {
        throw std::runtime_error("no data rows" +
                                 (series.ticker.empty() ? "" : " for " + series.ticker));
    }

    std::stable_sort(series.bars.begin(), series.bars.end(),
                     [](const PriceBar& a, const PriceBar& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < series.bars.size(); ++i) {
        if (series.bars[i].date == series.bars[i - 1].date) {
            throw std::runtime_error("duplicate date " + series.bars[i].date.to_string());
        }
    }
    return series;
}

PriceSeries load_ohlcv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string ticker = std::filesystem::path(path).stem().string();
    try {
        return parse_ohlcv_csv(in, ticker);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::string serialize_ohlcv_csv(const PriceSeries& series) {
    std::string out = "date,open,high,low,close,volume\n";
    for (const PriceBar& b : series.bars) {
        out += b.date.to_string();
        for (double v : {b.open, b.high, b.low, b.close, b.volume}) {
            out += ',';
            append_double(out, v);
        }
        out += '\n';
    }
    return out;
}

std::pair<PriceSeries, PriceSeries> split_series(const PriceSeries& series,
                                                 const SplitSpec& spec) {
    spec.validate();
    if (series.bars.empty()) throw std::invalid_argument("empty series");

    PriceSeries train{series.ticker, {}};
    PriceSeries test{series.ticker, {}};
    for (const PriceBar& b : series.bars) {
        if (b.date >= spec.train_start && b.date <= spec.train_end) {
            train.bars.push_back(b);
        } else if (b.date >= spec.test_start && b.date <= spec.test_end) {
            test.bars.push_back(b);
        }
    }
    if (train.bars.empty()) {
        throw std::runtime_error(series.ticker + ": no bars in training range " +
                                 spec.train_start.to_string() + ".." + spec.train_end.to_string());
    }
    if (test.bars.empty()) {
        throw std::runtime_error(series.ticker + ": no bars in test range " +
                                 spec.test_start.to_string() + ".." + spec.test_end.to_string());
    }
    return {std::move(train), std::move(test)};
}

}  // namespace cnntrade
