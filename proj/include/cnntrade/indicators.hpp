#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "cnntrade/market_data.hpp"

namespace cnntrade {

inline constexpr int kImageSize = 15;     // indicators (rows) x window lengths (cols)
inline constexpr int kMinPeriod = 6;      // column j holds period 6 + j
inline constexpr int kMaxPeriod = 20;

// The 15 indicators, in default image row order. Composite indicators take
// fast = l and slow = 2l.
enum class IndicatorId {
    Rsi,
    WilliamsR,
    Sma,
    Ema,
    Wma,
    Hma,
    Tema,
    Cci,
    Cmo,
    Roc,
    Macd,
    Ppo,
    Cmf,
    Adx,
    Psar,
};

std::array<IndicatorId, kImageSize> default_indicator_order();
std::string_view indicator_name(IndicatorId id);
IndicatorId indicator_from_name(std::string_view name);  // throws on unknown

// Number of bars (ending at the evaluation day, inclusive) an indicator
// needs at period l. All indicators here are windowed: bars older than this
// never influence the value, which keeps images shift-equivariant.
int lookback_bars(IndicatorId id, int period);

// Worst-case lookback over all 15 indicators at the given maximum period.
int max_lookback(int max_period = kMaxPeriod);

enum class Label : int { Buy = 0, Sell = 1, Hold = 2 };
std::string_view label_name(Label l);

// 15x15 row-major matrix of indicator values.
struct ImageMatrix {
    std::array<double, kImageSize * kImageSize> v{};

    double& at(int row, int col) { return v[row * kImageSize + col]; }
    double at(int row, int col) const { return v[row * kImageSize + col]; }
};

struct StockImage {
    Date date;
    ImageMatrix values;
    std::optional<Label> label;
};

// Indicator value at day `d` with period parameter l. Throws on insufficient
// history; the result is always finite (degenerate denominators fall back to
// the indicator's defined neutral value).
double compute_indicator(IndicatorId id, const PriceSeries& series, const Date& d, int period);
double compute_indicator_at(IndicatorId id, const PriceSeries& series, std::size_t bar_index,
                            int period);

double sma(const PriceSeries& series, const Date& d, int period);

// Entry (i, j) = indicator order[i] at period 6 + j. Label left unset.
StockImage build_image(const PriceSeries& series, const Date& d);
StockImage build_image(const PriceSeries& series, const Date& d,
                       std::span<const IndicatorId, kImageSize> order);
StockImage build_image_at(const PriceSeries& series, std::size_t bar_index,
                          std::span<const IndicatorId, kImageSize> order);

}  // namespace cnntrade
