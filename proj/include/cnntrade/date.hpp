#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace cnntrade {

// Calendar date. Trading days are whatever dates appear in the input data;
// there is no exchange-calendar logic anywhere in this library.
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;

    bool valid() const;

    // ISO-8601, YYYY-MM-DD.
    std::string to_string() const;
    static Date parse(std::string_view text);  // throws std::invalid_argument
};

}  // namespace cnntrade
