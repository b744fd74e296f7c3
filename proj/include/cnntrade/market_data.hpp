#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cnntrade/date.hpp"

namespace cnntrade {

// One trading day of OHLCV data. Prices are used as supplied; if adjusted
// prices are wanted, supply adjusted data.
struct PriceBar {
    Date date;
    double open = 0;
    double high = 0;
    double low = 0;
    double close = 0;
    double volume = 0;

    // Empty when the bar satisfies all invariants, otherwise a description
    // of the first violated one.
    std::optional<std::string> violation() const;
};

struct PriceSeries {
    std::string ticker;
    std::vector<PriceBar> bars;  // strictly ascending by date, no duplicates

    // Index of the bar at `d`, if present. Bars are sorted, so this is a
    // binary search.
    std::optional<std::size_t> index_of(const Date& d) const;
    const PriceBar& at(const Date& d) const;  // throws if absent
};

struct SplitSpec {
    Date train_start, train_end, test_start, test_end;

    void validate() const;  // throws std::invalid_argument
};

// Parses `date,open,high,low,close,volume` CSV. Rows may appear in any
// order; output is sorted ascending. Malformed rows and duplicate dates are
// reported with their line number.
PriceSeries parse_ohlcv_csv(std::istream& in, std::string ticker);
PriceSeries load_ohlcv_file(const std::string& path);  // ticker = file stem

// Inverse of parse_ohlcv_csv up to float formatting; emitted doubles use
// shortest round-trip notation so parse(serialize(s)) == s.
std::string serialize_ohlcv_csv(const PriceSeries& series);

// Partitions by date into [train_start, train_end] and [test_start, test_end].
// Throws if either partition comes out empty.
std::pair<PriceSeries, PriceSeries> split_series(const PriceSeries& series,
                                                 const SplitSpec& spec);

}  // namespace cnntrade
