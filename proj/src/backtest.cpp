#include "cnntrade/backtest.hpp"

#include <stdexcept>

namespace cnntrade {

BacktestResult simulate(const std::vector<std::pair<Date, Label>>& predictions,
                        const PriceSeries& series, double initial_cash,
                        double initial_stock_value, double fee_rate) {
    if (predictions.empty()) throw std::invalid_argument("no predictions to simulate");
    if (initial_cash < 0 || initial_stock_value < 0) {
        throw std::invalid_argument("initial amounts must be non-negative");
    }

    const double first_close = series.at(predictions.front().first).close;
    double cash = initial_cash;
    double shares = initial_stock_value / first_close;

    BacktestResult result;
    result.initial_value = initial_cash + initial_stock_value;
    result.daily.reserve(predictions.size());

    for (const auto& [date, action] : predictions) {
        const double price = series.at(date).close;  // throws if the date has no bar
        if (action == Label::Buy) {
            double spend = 0.5 * cash;
            shares += spend * (1.0 - fee_rate) / price;
            cash -= spend;
            result.trade_count++;
        } else if (action == Label::Sell) {
            double sold = 0.5 * shares;
            cash += sold * price * (1.0 - fee_rate);
            shares -= sold;
            result.trade_count++;
        }
        result.daily.push_back({date, action, price, cash, shares, cash + shares * price});
    }

    result.final_value = result.daily.back().total;
    result.total_return = (result.final_value - result.initial_value) / result.initial_value;
    return result;
}

ClassificationMetrics compute_metrics(const std::vector<Label>& predicted,
                                      const std::vector<Label>& actual) {
    if (predicted.size() != actual.size()) {
        throw std::invalid_argument("predicted/actual length mismatch");
    }
    if (predicted.empty()) throw std::invalid_argument("empty label lists");

    ClassificationMetrics m;
    m.total = static_cast<long>(predicted.size());
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        m.confusion[static_cast<int>(actual[i])][static_cast<int>(predicted[i])]++;
    }

    long trace = 0;
    for (int c = 0; c < 3; ++c) {
        long tp = m.confusion[c][c];
        long predicted_c = 0, actual_c = 0;
        for (int k = 0; k < 3; ++k) {
            predicted_c += m.confusion[k][c];
            actual_c += m.confusion[c][k];
        }
        m.precision[c] = predicted_c > 0 ? static_cast<double>(tp) / predicted_c : 0.0;
        m.recall[c] = actual_c > 0 ? static_cast<double>(tp) / actual_c : 0.0;
        double pr = m.precision[c] + m.recall[c];
        m.f1[c] = pr > 0 ? 2.0 * m.precision[c] * m.recall[c] / pr : 0.0;
        trace += tp;
    }
    m.accuracy = static_cast<double>(trace) / m.total;
    return m;
}

Report build_report(const std::vector<TickerOutcome>& outcomes) {
    if (outcomes.empty()) throw std::invalid_argument("no results to report");
    Report report;
    for (const auto& outcome : outcomes) {
        report.summary.push_back({outcome.ticker, outcome.model, outcome.accuracy,
                                  outcome.backtest.total_return});
        std::vector<std::pair<Date, double>> series;
        series.reserve(outcome.backtest.daily.size());
        for (const auto& day : outcome.backtest.daily) {
            series.emplace_back(day.date, day.total);
        }
        report.asset_series.push_back(std::move(series));
    }
    return report;
}

}  // namespace cnntrade
