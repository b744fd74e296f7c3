#include "cnntrade/date.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace cnntrade {

namespace {

bool leap_year(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && leap_year(y)) return 29;
    return kDays[m - 1];
}

int parse_int(std::string_view s) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::invalid_argument("invalid date component: " + std::string(s));
    }
    return value;
}

}  // namespace

bool Date::valid() const {
    return year >= 1 && month >= 1 && month <= 12 && day >= 1 &&
           day <= days_in_month(year, month);
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

Date Date::parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw std::invalid_argument("expected YYYY-MM-DD, got '" + std::string(text) + "'");
    }
    Date d;
    d.year = parse_int(text.substr(0, 4));
    d.month = parse_int(text.substr(5, 2));
    d.day = parse_int(text.substr(8, 2));
    if (!d.valid()) {
        throw std::invalid_argument("invalid calendar date '" + std::string(text) + "'");
    }
    return d;
}

}  // namespace cnntrade
