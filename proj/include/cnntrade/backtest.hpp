#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "cnntrade/indicators.hpp"
#include "cnntrade/market_data.hpp"

namespace cnntrade {

struct DayRecord {
    Date date;
    Label action = Label::Hold;  // action taken that day
    double price = 0;            // execution price (the day's close)
    double cash = 0;             // after the day's transaction
    double shares = 0;
    double total = 0;            // cash + shares * price
};

struct BacktestResult {
    std::vector<DayRecord> daily;
    double initial_value = 0;
    double final_value = 0;
    double total_return = 0;  // (final - initial) / initial over the test period
    int trade_count = 0;
};

// The trading protocol: start with `initial_cash` plus shares worth
// `initial_stock_value` at the first prediction day's close. Buy spends 50%
// of cash, Sell liquidates 50% of shares, Hold does nothing; execution at
// the same day's close, fractional shares, fee_rate of 0 by default.
BacktestResult simulate(const std::vector<std::pair<Date, Label>>& predictions,
                        const PriceSeries& series, double initial_cash = 10000.0,
                        double initial_stock_value = 10000.0, double fee_rate = 0.0);

struct ClassificationMetrics {
    std::array<std::array<long, 3>, 3> confusion{};  // [actual][predicted]
    std::array<double, 3> precision{}, recall{}, f1{};
    double accuracy = 0;
    long total = 0;
};

// Standard per-class precision/recall/F1. A class never predicted gets
// precision 0; a class never present gets recall 0; F1 is 0 when
// precision + recall is 0.
ClassificationMetrics compute_metrics(const std::vector<Label>& predicted,
                                      const std::vector<Label>& actual);

struct TickerOutcome {
    std::string ticker;
    std::string model;  // e.g. "cnn", "lasso"
    double accuracy = 0;
    BacktestResult backtest;
};

struct SummaryRow {
    std::string ticker;
    std::string model;
    double accuracy = 0;
    double total_return = 0;
};

struct Report {
    std::vector<SummaryRow> summary;  // one row per (ticker, model)
    // Per (ticker, model) total-asset trajectory, aligned with summary.
    std::vector<std::vector<std::pair<Date, double>>> asset_series;
};

Report build_report(const std::vector<TickerOutcome>& outcomes);

}  // namespace cnntrade
