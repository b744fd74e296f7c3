#include "cnntrade/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cnntrade {

namespace {

constexpr double kDenomGuard = 1e-12;

// Neutral fallbacks for degenerate denominators, per indicator.
constexpr double kRsiAllGains = 100.0;
constexpr double kWilliamsFlat = -50.0;

struct Window {
    const PriceBar* bars;  // first bar of the window
    int n;                 // window length; bars[n-1] is the evaluation day

    double close(int i) const { return bars[i].close; }
    double high(int i) const { return bars[i].high; }
    double low(int i) const { return bars[i].low; }
    double vol(int i) const { return bars[i].volume; }
};

double mean_closes(const Window& w, int from, int count) {
    double sum = 0;
    for (int i = from; i < from + count; ++i) sum += w.close(i);
    return sum / count;
}

// EMA over `values` with SMA seeding: output k corresponds to input p-1+k.
std::vector<double> ema_series(const std::vector<double>& values, int p) {
    const double alpha = 2.0 / (p + 1.0);
    std::vector<double> out;
    out.reserve(values.size() - p + 1);
    double seed = 0;
    for (int i = 0; i < p; ++i) seed += values[i];
    seed /= p;
    out.push_back(seed);
    for (std::size_t i = p; i < values.size(); ++i) {
        seed = alpha * values[i] + (1.0 - alpha) * seed;
        out.push_back(seed);
    }
    return out;
}

// EMA of the closes of the trailing 4p-bar window ending at the last bar.
double ema_tail(const Window& w, int p) {
    const double alpha = 2.0 / (p + 1.0);
    int start = w.n - 4 * p;
    double s = mean_closes(w, start, p);
    for (int i = start + p; i < w.n; ++i) {
        s = alpha * w.close(i) + (1.0 - alpha) * s;
    }
    return s;
}

// Weighted moving average over the p bars ending at index `last`, weights 1..p.
double wma_at(const Window& w, int last, int p) {
    double num = 0;
    for (int k = 1; k <= p; ++k) num += k * w.close(last - p + k);
    return num / (p * (p + 1) / 2.0);
}

double indicator_rsi(const Window& w, int p) {
    double gains = 0, losses = 0;
    for (int i = w.n - p; i < w.n; ++i) {
        double diff = w.close(i) - w.close(i - 1);
        if (diff > 0) gains += diff; else losses -= diff;
    }
    double avg_loss = losses / p;
    if (avg_loss < kDenomGuard) return kRsiAllGains;
    double rs = (gains / p) / avg_loss;
    return 100.0 - 100.0 / (1.0 + rs);
}

double indicator_williams_r(const Window& w, int p) {
    double hh = w.high(w.n - p), ll = w.low(w.n - p);
    for (int i = w.n - p + 1; i < w.n; ++i) {
        hh = std::max(hh, w.high(i));
        ll = std::min(ll, w.low(i));
    }
    if (hh - ll < kDenomGuard) return kWilliamsFlat;
    return -100.0 * (hh - w.close(w.n - 1)) / (hh - ll);
}

double indicator_hma(const Window& w, int p) {
    int m = static_cast<int>(std::floor(std::sqrt(static_cast<double>(p))));
    int half = p / 2;
    std::vector<double> y(m);
    for (int k = 0; k < m; ++k) {
        int last = w.n - m + k;
        y[k] = 2.0 * wma_at(w, last, half) - wma_at(w, last, p);
    }
    double num = 0;
    for (int k = 1; k <= m; ++k) num += k * y[k - 1];
    return num / (m * (m + 1) / 2.0);
}

double indicator_tema(const Window& w, int p) {
    std::vector<double> closes(w.n);
    for (int i = 0; i < w.n; ++i) closes[i] = w.close(i);
    auto e1 = ema_series(closes, p);
    auto e2 = ema_series(e1, p);
    auto e3 = ema_series(e2, p);
    return 3.0 * e1.back() - 3.0 * e2.back() + e3.back();
}

double indicator_cci(const Window& w, int p) {
    std::vector<double> tp(p);
    for (int i = 0; i < p; ++i) {
        int j = w.n - p + i;
        tp[i] = (w.high(j) + w.low(j) + w.close(j)) / 3.0;
    }
    double avg = 0;
    for (double t : tp) avg += t;
    avg /= p;
    double md = 0;
    for (double t : tp) md += std::abs(t - avg);
    md /= p;
    if (md < kDenomGuard) return 0.0;
    return (tp.back() - avg) / (0.015 * md);
}

double indicator_cmo(const Window& w, int p) {
    double gains = 0, losses = 0;
    for (int i = w.n - p; i < w.n; ++i) {
        double diff = w.close(i) - w.close(i - 1);
        if (diff > 0) gains += diff; else losses -= diff;
    }
    double denom = gains + losses;
    if (denom < kDenomGuard) return 0.0;
    return 100.0 * (gains - losses) / denom;
}

double indicator_roc(const Window& w, int p) {
    double base = w.close(w.n - 1 - p);
    if (std::abs(base) < kDenomGuard) return 0.0;
    return 100.0 * (w.close(w.n - 1) - base) / base;
}

double indicator_cmf(const Window& w, int p) {
    double mfv_sum = 0, vol_sum = 0;
    for (int i = w.n - p; i < w.n; ++i) {
        double range = w.high(i) - w.low(i);
        double mult = range < kDenomGuard
                          ? 0.0
                          : ((w.close(i) - w.low(i)) - (w.high(i) - w.close(i))) / range;
        mfv_sum += mult * w.vol(i);
        vol_sum += w.vol(i);
    }
    if (vol_sum < kDenomGuard) return 0.0;
    return mfv_sum / vol_sum;
}

// Directional movement / true range at bar i (needs bar i-1).
void dm_tr(const Window& w, int i, double& dm_plus, double& dm_minus, double& tr) {
    double up = w.high(i) - w.high(i - 1);
    double down = w.low(i - 1) - w.low(i);
    dm_plus = (up > down && up > 0) ? up : 0.0;
    dm_minus = (down > up && down > 0) ? down : 0.0;
    tr = std::max({w.high(i) - w.low(i), std::abs(w.high(i) - w.close(i - 1)),
                   std::abs(w.low(i) - w.close(i - 1))});
}

// Windowed ADX: DI sums over trailing p bars, DX averaged over the last p days.
double indicator_adx(const Window& w, int p) {
    double dx_sum = 0;
    for (int s = w.n - p; s < w.n; ++s) {
        double dmp_sum = 0, dmm_sum = 0, tr_sum = 0;
        for (int i = s - p + 1; i <= s; ++i) {
            double dmp, dmm, tr;
            dm_tr(w, i, dmp, dmm, tr);
            dmp_sum += dmp;
            dmm_sum += dmm;
            tr_sum += tr;
        }
        double di_plus = tr_sum < kDenomGuard ? 0.0 : 100.0 * dmp_sum / tr_sum;
        double di_minus = tr_sum < kDenomGuard ? 0.0 : 100.0 * dmm_sum / tr_sum;
        double denom = di_plus + di_minus;
        dx_sum += denom < kDenomGuard ? 0.0 : 100.0 * std::abs(di_plus - di_minus) / denom;
    }
    return dx_sum / p;
}

// Parabolic SAR run over the trailing p bars, standard 0.02/0.02/0.2
// acceleration schedule, seeded from the first two bars of the window.
double indicator_psar(const Window& w, int p) {
    const double af0 = 0.02, af_step = 0.02, af_max = 0.2;
    int start = w.n - p;
    bool uptrend = w.close(start + 1) >= w.close(start);
    double sar = uptrend ? w.low(start) : w.high(start);
    double ep = uptrend ? w.high(start) : w.low(start);
    double af = af0;
    for (int i = start + 1; i < w.n; ++i) {
        sar = sar + af * (ep - sar);
        if (uptrend) {
            sar = std::min(sar, w.low(i - 1));
            if (i - 2 >= start) sar = std::min(sar, w.low(i - 2));
            if (w.low(i) < sar) {
                uptrend = false;
                sar = ep;
                ep = w.low(i);
                af = af0;
            } else if (w.high(i) > ep) {
                ep = w.high(i);
                af = std::min(af + af_step, af_max);
            }
        } else {
            sar = std::max(sar, w.high(i - 1));
            if (i - 2 >= start) sar = std::max(sar, w.high(i - 2));
            if (w.high(i) > sar) {
                uptrend = true;
                sar = ep;
                ep = w.high(i);
                af = af0;
            } else if (w.low(i) < ep) {
                ep = w.low(i);
                af = std::min(af + af_step, af_max);
            }
        }
    }
    return sar;
}

}  // namespace

std::array<IndicatorId, kImageSize> default_indicator_order() {
    return {IndicatorId::Rsi,  IndicatorId::WilliamsR, IndicatorId::Sma, IndicatorId::Ema,
            IndicatorId::Wma,  IndicatorId::Hma,       IndicatorId::Tema, IndicatorId::Cci,
            IndicatorId::Cmo,  IndicatorId::Roc,       IndicatorId::Macd, IndicatorId::Ppo,
            IndicatorId::Cmf,  IndicatorId::Adx,       IndicatorId::Psar};
}

std::string_view indicator_name(IndicatorId id) {
    switch (id) {
        case IndicatorId::Rsi: return "rsi";
        case IndicatorId::WilliamsR: return "williams_r";
        case IndicatorId::Sma: return "sma";
        case IndicatorId::Ema: return "ema";
        case IndicatorId::Wma: return "wma";
        case IndicatorId::Hma: return "hma";
        case IndicatorId::Tema: return "tema";
        case IndicatorId::Cci: return "cci";
        case IndicatorId::Cmo: return "cmo";
        case IndicatorId::Roc: return "roc";
        case IndicatorId::Macd: return "macd";
        case IndicatorId::Ppo: return "ppo";
        case IndicatorId::Cmf: return "cmf";
        case IndicatorId::Adx: return "adx";
        case IndicatorId::Psar: return "psar";
    }
    throw std::invalid_argument("unknown indicator id");
}

IndicatorId indicator_from_name(std::string_view name) {
    for (IndicatorId id : default_indicator_order()) {
        if (indicator_name(id) == name) return id;
    }
    throw std::invalid_argument("unknown indicator '" + std::string(name) + "'");
}

std::string_view label_name(Label l) {
    switch (l) {
        case Label::Buy: return "buy";
        case Label::Sell: return "sell";
        case Label::Hold: return "hold";
    }
    throw std::invalid_argument("unknown label");
}

int lookback_bars(IndicatorId id, int p) {
    switch (id) {
        case IndicatorId::Rsi: return p + 1;
        case IndicatorId::WilliamsR: return p;
        case IndicatorId::Sma: return p;
        case IndicatorId::Ema: return 4 * p;
        case IndicatorId::Wma: return p;
        case IndicatorId::Hma: return p + static_cast<int>(std::floor(std::sqrt(double(p)))) - 1;
        case IndicatorId::Tema: return 6 * p;
        case IndicatorId::Cci: return p;
        case IndicatorId::Cmo: return p + 1;
        case IndicatorId::Roc: return p + 1;
        case IndicatorId::Macd: return 8 * p;  // slow EMA at 2l dominates
        case IndicatorId::Ppo: return 8 * p;
        case IndicatorId::Cmf: return p;
        case IndicatorId::Adx: return 2 * p;
        case IndicatorId::Psar: return p;
    }
    throw std::invalid_argument("unknown indicator id");
}

int max_lookback(int max_period) {
    int worst = 0;
    for (IndicatorId id : default_indicator_order()) {
        worst = std::max(worst, lookback_bars(id, max_period));
    }
    return worst;
}

double compute_indicator_at(IndicatorId id, const PriceSeries& series, std::size_t bar_index,
                            int period) {
    if (period < 1) throw std::invalid_argument("period must be >= 1");
    // hma needs a non-empty half window, psar at least two bars to seed.
    if ((id == IndicatorId::Hma || id == IndicatorId::Psar) && period < 2) {
        throw std::invalid_argument(std::string(indicator_name(id)) + " needs period >= 2");
    }
    if (bar_index >= series.bars.size()) throw std::out_of_range("bar index out of range");
    int need = lookback_bars(id, period);
    if (static_cast<std::size_t>(need) > bar_index + 1) {
        throw std::runtime_error("insufficient history: " + std::string(indicator_name(id)) +
                                 "(" + std::to_string(period) + ") needs " + std::to_string(need) +
                                 " bars at " + series.bars[bar_index].date.to_string() + ", have " +
                                 std::to_string(bar_index + 1));
    }
    Window w{series.bars.data() + (bar_index + 1 - need), need};

    double value = 0;
    switch (id) {
        case IndicatorId::Rsi: value = indicator_rsi(w, period); break;
        case IndicatorId::WilliamsR: value = indicator_williams_r(w, period); break;
        case IndicatorId::Sma: value = mean_closes(w, w.n - period, period); break;
        case IndicatorId::Ema: value = ema_tail(w, period); break;
        case IndicatorId::Wma: value = wma_at(w, w.n - 1, period); break;
        case IndicatorId::Hma: value = indicator_hma(w, period); break;
        case IndicatorId::Tema: value = indicator_tema(w, period); break;
        case IndicatorId::Cci: value = indicator_cci(w, period); break;
        case IndicatorId::Cmo: value = indicator_cmo(w, period); break;
        case IndicatorId::Roc: value = indicator_roc(w, period); break;
        case IndicatorId::Macd: {
            Window fast{series.bars.data() + (bar_index + 1 - 4 * period), 4 * period};
            value = ema_tail(fast, period) - ema_tail(w, 2 * period);
            break;
        }
        case IndicatorId::Ppo: {
            Window fast{series.bars.data() + (bar_index + 1 - 4 * period), 4 * period};
            double slow = ema_tail(w, 2 * period);
            value = std::abs(slow) < kDenomGuard
                        ? 0.0
                        : 100.0 * (ema_tail(fast, period) - slow) / slow;
            break;
        }
        case IndicatorId::Cmf: value = indicator_cmf(w, period); break;
        case IndicatorId::Adx: value = indicator_adx(w, period); break;
        case IndicatorId::Psar: value = indicator_psar(w, period); break;
    }
    if (!std::isfinite(value)) {
        throw std::runtime_error("non-finite " + std::string(indicator_name(id)) + "(" +
                                 std::to_string(period) + ") at " +
                                 series.bars[bar_index].date.to_string());
    }
    return value;
}

double compute_indicator(IndicatorId id, const PriceSeries& series, const Date& d, int period) {
    auto idx = series.index_of(d);
    if (!idx) throw std::runtime_error("no bar for date " + d.to_string());
    return compute_indicator_at(id, series, *idx, period);
}

double sma(const PriceSeries& series, const Date& d, int period) {
    return compute_indicator(IndicatorId::Sma, series, d, period);
}

StockImage build_image_at(const PriceSeries& series, std::size_t bar_index,
                          std::span<const IndicatorId, kImageSize> order) {
    StockImage image;
    image.date = series.bars.at(bar_index).date;
    for (int row = 0; row < kImageSize; ++row) {
        for (int col = 0; col < kImageSize; ++col) {
            image.values.at(row, col) =
                compute_indicator_at(order[row], series, bar_index, kMinPeriod + col);
        }
    }
    return image;
}

StockImage build_image(const PriceSeries& series, const Date& d,
                       std::span<const IndicatorId, kImageSize> order) {
    auto idx = series.index_of(d);
    if (!idx) throw std::runtime_error("no bar for date " + d.to_string());
    return build_image_at(series, *idx, order);
}

StockImage build_image(const PriceSeries& series, const Date& d) {
    auto order = default_indicator_order();
    return build_image(series, d, order);
}

}  // namespace cnntrade
