#include <doctest.h>

#include <cmath>

#include "../support/synthetic.hpp"
#include "cnntrade/backtest.hpp"

using namespace cnntrade;
namespace ts = cnntrade::testing;

namespace {

std::vector<std::pair<Date, Label>> actions_for(const PriceSeries& s, Label action) {
    std::vector<std::pair<Date, Label>> out;
    for (const auto& b : s.bars) out.emplace_back(b.date, action);
    return out;
}

}  // namespace

TEST_CASE("buy-and-hold on a 100 -> 110 path returns five percent") {
    std::vector<double> closes;
    for (int i = 0; i <= 10; ++i) closes.push_back(100.0 + i);
    PriceSeries s = ts::series_from_closes(closes, "BH", {2020, 1, 6}, 1, {0.0});
    BacktestResult r = simulate(actions_for(s, Label::Hold), s);
    // 10000 cash + 100 shares bought at 100, worth 110 each at the end.
    CHECK(r.initial_value == 20000.0);
    CHECK(r.final_value == doctest::Approx(21000.0).epsilon(1e-12));
    CHECK(r.total_return == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(r.trade_count == 0);
}

TEST_CASE("a single buy moves half the cash into shares at the close") {
    std::vector<double> closes{100.0, 100.0};
    PriceSeries s = ts::series_from_closes(closes, "B1", {2020, 1, 6}, 2, {0.0});
    std::vector<std::pair<Date, Label>> preds{{s.bars[0].date, Label::Buy},
                                              {s.bars[1].date, Label::Hold}};
    BacktestResult r = simulate(preds, s);
    CHECK(r.daily[0].cash == doctest::Approx(5000.0));
    CHECK(r.daily[0].shares == doctest::Approx(150.0));  // 100 initial + 50 bought
    CHECK(r.daily[0].total == doctest::Approx(20000.0));  // unchanged at the instant
    CHECK(r.trade_count == 1);
}

TEST_CASE("a single sell liquidates half the shares") {
    std::vector<double> closes{100.0, 100.0};
    PriceSeries s = ts::series_from_closes(closes, "S1", {2020, 1, 6}, 3, {0.0});
    std::vector<std::pair<Date, Label>> preds{{s.bars[0].date, Label::Sell},
                                              {s.bars[1].date, Label::Hold}};
    BacktestResult r = simulate(preds, s);
    CHECK(r.daily[0].shares == doctest::Approx(50.0));
    CHECK(r.daily[0].cash == doctest::Approx(15000.0));
    CHECK(r.daily[0].total == doctest::Approx(20000.0));
}

TEST_CASE("constant prices return exactly zero whatever the strategy") {
    std::vector<double> closes(60, 83.0);
    PriceSeries s = ts::series_from_closes(closes, "C", {2020, 1, 6}, 4, {0.0});
    Rng rng(5);
    std::vector<std::pair<Date, Label>> preds;
    for (const auto& b : s.bars) {
        preds.emplace_back(b.date, static_cast<Label>(rng.below(3)));
    }
    BacktestResult r = simulate(preds, s);
    CHECK(std::abs(r.total_return) < 1e-12);
    CHECK(r.final_value == doctest::Approx(20000.0).epsilon(1e-12));
}

TEST_CASE("total value is conserved across every transaction") {
    PriceSeries s = ts::random_walk_series(6, 300, "RW");
    Rng rng(7);
    std::vector<std::pair<Date, Label>> preds;
    for (const auto& b : s.bars) preds.emplace_back(b.date, static_cast<Label>(rng.below(3)));
    BacktestResult r = simulate(preds, s);

    double cash = 10000.0;
    double shares = 10000.0 / s.bars.front().close;
    int violations = 0;
    for (const auto& day : r.daily) {
        double before = cash + shares * day.price;   // value entering the day, at exec price
        double after = day.cash + day.shares * day.price;
        if (std::abs(before - after) > 1e-9 * std::max(1.0, std::abs(before))) ++violations;
        if (day.cash < 0 || day.shares < 0) ++violations;
        cash = day.cash;
        shares = day.shares;
    }
    CHECK(violations == 0);
}

TEST_CASE("swapping a sell for a hold cannot hurt on a rising path") {
    std::vector<double> closes;
    for (int i = 0; i < 40; ++i) closes.push_back(100.0 * std::pow(1.01, i));
    PriceSeries s = ts::series_from_closes(closes, "UP", {2020, 1, 6}, 8, {0.0});

    Rng rng(9);
    std::vector<std::pair<Date, Label>> preds;
    for (const auto& b : s.bars) preds.emplace_back(b.date, static_cast<Label>(rng.below(3)));
    double base = simulate(preds, s).final_value;

    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].second != Label::Sell) continue;
        auto variant = preds;
        variant[i].second = Label::Hold;
        CHECK(simulate(variant, s).final_value >= base - 1e-9);
    }
}

TEST_CASE("transaction fees drain value") {
    PriceSeries s = ts::random_walk_series(10, 100, "FEE");
    std::vector<std::pair<Date, Label>> preds;
    Rng rng(11);
    for (const auto& b : s.bars) preds.emplace_back(b.date, static_cast<Label>(rng.below(3)));
    double no_fee = simulate(preds, s, 10000, 10000, 0.0).final_value;
    double with_fee = simulate(preds, s, 10000, 10000, 0.01).final_value;
    CHECK(with_fee < no_fee);
}

TEST_CASE("a prediction on a date without a bar is an error") {
    PriceSeries s = ts::random_walk_series(12, 20, "MISS");
    std::vector<std::pair<Date, Label>> preds{{Date{1999, 1, 1}, Label::Buy}};
    CHECK_THROWS_AS(simulate(preds, s), std::runtime_error);
    CHECK_THROWS_AS(simulate({}, s), std::invalid_argument);
}

TEST_CASE("identical predictions give perfect metrics") {
    std::vector<Label> labels{Label::Buy, Label::Sell, Label::Hold, Label::Hold, Label::Buy};
    ClassificationMetrics m = compute_metrics(labels, labels);
    CHECK(m.accuracy == 1.0);
    for (int c = 0; c < 3; ++c) {
        CHECK(m.precision[c] == 1.0);
        CHECK(m.recall[c] == 1.0);
        CHECK(m.f1[c] == 1.0);
    }
}

TEST_CASE("all-Hold predictions against half Buy half Hold actuals") {
    std::vector<Label> predicted(10, Label::Hold);
    std::vector<Label> actual;
    for (int i = 0; i < 5; ++i) actual.push_back(Label::Buy);
    for (int i = 0; i < 5; ++i) actual.push_back(Label::Hold);
    ClassificationMetrics m = compute_metrics(predicted, actual);
    CHECK(m.precision[2] == doctest::Approx(0.5));
    CHECK(m.recall[0] == 0.0);
    CHECK(m.precision[0] == 0.0);  // never predicted: defined as 0
    CHECK(m.f1[0] == 0.0);
    CHECK(m.accuracy == doctest::Approx(0.5));
}

TEST_CASE("the Buy F1 from precision 0.34 and recall 0.84 lands on 0.48") {
    // Smallest integer confusion matrix with exactly those rates:
    // TP = 357, predicted Buy = 1050, actual Buy = 425.
    std::vector<Label> predicted, actual;
    for (int i = 0; i < 357; ++i) {
        predicted.push_back(Label::Buy);
        actual.push_back(Label::Buy);
    }
    for (int i = 0; i < 693; ++i) {
        predicted.push_back(Label::Buy);
        actual.push_back(Label::Hold);
    }
    for (int i = 0; i < 68; ++i) {
        predicted.push_back(Label::Hold);
        actual.push_back(Label::Buy);
    }
    for (int i = 0; i < 1500; ++i) {
        predicted.push_back(Label::Hold);
        actual.push_back(Label::Hold);
    }
    ClassificationMetrics m = compute_metrics(predicted, actual);
    CHECK(m.precision[0] == doctest::Approx(0.34).epsilon(1e-12));
    CHECK(m.recall[0] == doctest::Approx(0.84).epsilon(1e-12));
    CHECK(std::abs(m.f1[0] - 0.48) < 0.005);
}

TEST_CASE("metrics match a brute-force confusion computation on random labels") {
    Rng rng(13);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 5 + rng.below(120);
        std::vector<Label> predicted, actual;
        for (std::size_t i = 0; i < n; ++i) {
            predicted.push_back(static_cast<Label>(rng.below(3)));
            actual.push_back(static_cast<Label>(rng.below(3)));
        }
        ClassificationMetrics m = compute_metrics(predicted, actual);

        long table[3][3] = {};
        for (std::size_t i = 0; i < n; ++i) {
            table[static_cast<int>(actual[i])][static_cast<int>(predicted[i])]++;
        }
        long trace = 0, total = 0;
        for (int a = 0; a < 3; ++a) {
            for (int p = 0; p < 3; ++p) {
                if (m.confusion[a][p] != table[a][p]) ++mismatches;
                total += table[a][p];
            }
            trace += table[a][a];
        }
        if (total != m.total) ++mismatches;
        for (int c = 0; c < 3; ++c) {
            long pred_c = table[0][c] + table[1][c] + table[2][c];
            long act_c = table[c][0] + table[c][1] + table[c][2];
            double prec = pred_c ? double(table[c][c]) / pred_c : 0.0;
            double rec = act_c ? double(table[c][c]) / act_c : 0.0;
            double f1 = (prec + rec) > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
            if (m.precision[c] != prec || m.recall[c] != rec || m.f1[c] != f1) ++mismatches;
        }
        if (m.accuracy != double(trace) / total) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("metrics validate their inputs") {
    std::vector<Label> a{Label::Buy}, b{Label::Buy, Label::Sell};
    CHECK_THROWS_AS(compute_metrics(a, b), std::invalid_argument);
    CHECK_THROWS_AS(compute_metrics({}, {}), std::invalid_argument);
}

TEST_CASE("reports carry one row and one asset series per outcome") {
    std::vector<double> closes{100.0};
    PriceSeries s = ts::series_from_closes(closes, "ONE", {2020, 1, 6}, 14, {0.0});
    TickerOutcome outcome;
    outcome.ticker = "ONE";
    outcome.model = "cnn";
    outcome.accuracy = 0.5;
    outcome.backtest = simulate({{s.bars[0].date, Label::Hold}}, s);

    Report report = build_report({outcome});
    REQUIRE(report.summary.size() == 1);
    CHECK(report.summary[0].ticker == "ONE");
    CHECK(report.summary[0].total_return == 0.0);
    REQUIRE(report.asset_series.size() == 1);
    CHECK(report.asset_series[0].size() == 1);

    CHECK_THROWS_AS(build_report({}), std::invalid_argument);
}
