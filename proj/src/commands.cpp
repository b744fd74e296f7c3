#include "cnntrade/commands.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "cnntrade/cnn.hpp"
#include "cnntrade/diagnostics.hpp"
#include "cnntrade/lasso.hpp"

namespace cnntrade {

namespace {

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void require_artifact(const std::filesystem::path& path, const std::string& producer) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("missing " + path.string() + " (run `cnntrade " + producer +
                                 "` first)");
    }
}

PriceSeries load_ticker(const RunConfig& config, const std::string& ticker) {
    auto path = config.csv_path(ticker);
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("missing price file " + path.string());
    }
    return load_ohlcv_file(path.string());
}

// Predictions for every item of a test dataset, from both models.
struct EvaluatedTicker {
    std::vector<Label> actual;
    std::vector<Label> cnn_predicted;
    std::vector<Label> lasso_predicted;
    std::vector<Date> dates;
};

EvaluatedTicker evaluate_ticker(const RunConfig& config, const std::string& ticker) {
    auto test_path = artifacts::dataset(config, ticker, "test");
    require_artifact(test_path, "build-dataset");
    auto cnn_path = artifacts::cnn_checkpoint(config, ticker);
    require_artifact(cnn_path, "train");
    auto lasso_path = artifacts::lasso_checkpoint(config, ticker);
    require_artifact(lasso_path, "train");

    std::span<const IndicatorId, kImageSize> order(config.indicator_order);
    Dataset test = load_dataset(test_path, order);
    CnnModel cnn = load_model(cnn_path);
    LinearModel lasso = load_linear_model(lasso_path);

    EvaluatedTicker out;
    for (const auto& item : test.items) {
        out.actual.push_back(item.label);
        out.cnn_predicted.push_back(predict(cnn, item.values));
        out.lasso_predicted.push_back(predict_linear(lasso, item.values));
        out.dates.push_back(item.date);
    }
    return out;
}

std::string metrics_csv_text(const ClassificationMetrics& m) {
    std::string text = "class,precision,recall,f1\n";
    for (int c = 0; c < 3; ++c) {
        text += std::string(label_name(static_cast<Label>(c))) + "," + fmt(m.precision[c]) + "," +
                fmt(m.recall[c]) + "," + fmt(m.f1[c]) + "\n";
    }
    return text;
}

nlohmann::json metrics_json_object(const ClassificationMetrics& m) {
    nlohmann::json j;
    j["accuracy"] = m.accuracy;
    j["total"] = m.total;
    for (int c = 0; c < 3; ++c) {
        std::string name(label_name(static_cast<Label>(c)));
        j["classes"][name] = {{"precision", m.precision[c]},
                              {"recall", m.recall[c]},
                              {"f1", m.f1[c]}};
    }
    j["confusion"] = m.confusion;
    return j;
}

}  // namespace

namespace artifacts {

std::filesystem::path dataset(const RunConfig& c, const std::string& ticker,
                              const std::string& split) {
    return c.ticker_dir(ticker) / ("dataset_" + split + ".jsonl");
}
std::filesystem::path cnn_checkpoint(const RunConfig& c, const std::string& ticker) {
    return c.ticker_dir(ticker) / "cnn.ckpt";
}
std::filesystem::path lasso_checkpoint(const RunConfig& c, const std::string& ticker) {
    return c.ticker_dir(ticker) / "lasso.ckpt";
}
std::filesystem::path train_history(const RunConfig& c, const std::string& ticker) {
    return c.ticker_dir(ticker) / "train_history.csv";
}
std::filesystem::path metrics_json(const RunConfig& c, const std::string& ticker) {
    return c.ticker_dir(ticker) / "metrics.json";
}
std::filesystem::path metrics_csv(const RunConfig& c, const std::string& ticker,
                                  const std::string& model) {
    return c.ticker_dir(ticker) / ("metrics_" + model + ".csv");
}
std::filesystem::path backtest_csv(const RunConfig& c, const std::string& ticker,
                                   const std::string& model) {
    return c.ticker_dir(ticker) / ("backtest_" + model + ".csv");
}
std::filesystem::path backtest_json(const RunConfig& c, const std::string& ticker) {
    return c.ticker_dir(ticker) / "backtest_summary.json";
}
std::filesystem::path report_dir(const RunConfig& c) { return c.output_dir / "report"; }

}  // namespace artifacts

IngestReport cmd_ingest(const RunConfig& config, std::ostream& log) {
    if (!std::filesystem::exists(config.data_dir)) {
        throw std::runtime_error("data directory " + config.data_dir.string() + " does not exist");
    }

    IngestReport report;
    for (const auto& ticker : config.tickers) {
        IngestEntry entry;
        entry.ticker = ticker;
        entry.file = config.csv_path(ticker).string();
        try {
            PriceSeries series = load_ticker(config, ticker);
            entry.rows = series.bars.size();
            entry.first_date = series.bars.front().date;
            entry.last_date = series.bars.back().date;
            log << ticker << ": " << entry.rows << " bars, " << entry.first_date.to_string()
                << ".." << entry.last_date.to_string() << "\n";
        } catch (const std::exception& e) {
            entry.error = e.what();
            report.failures++;
            log << ticker << ": ERROR " << entry.error << "\n";
        }
        report.entries.push_back(entry);
    }

    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : report.entries) {
        nlohmann::json row;
        row["ticker"] = e.ticker;
        row["file"] = e.file;
        if (e.error.empty()) {
            row["rows"] = e.rows;
            row["first_date"] = e.first_date.to_string();
            row["last_date"] = e.last_date.to_string();
        } else {
            row["error"] = e.error;
        }
        j.push_back(row);
    }
    write_text(config.output_dir / "ingest_report.json", j.dump(2) + "\n");
    return report;
}

void cmd_diagnose(const RunConfig& config, std::ostream& log) {
    for (const auto& ticker : config.tickers) {
        PriceSeries series = load_ticker(config, ticker);
        auto dir = config.ticker_dir(ticker) / "diagnostics";

        // Diagnostics target the last train-range day with full history.
        std::ptrdiff_t pick = -1;
        const std::size_t need = static_cast<std::size_t>(max_lookback(kMaxPeriod));
        for (std::size_t t = 0; t < series.bars.size(); ++t) {
            const Date& d = series.bars[t].date;
            if (d >= config.split.train_start && d <= config.split.train_end && t + 1 >= need) {
                pick = static_cast<std::ptrdiff_t>(t);
            }
        }
        if (pick < 0) {
            throw std::runtime_error(ticker + ": no train-range day has " + std::to_string(need) +
                                     " bars of history");
        }

        std::span<const IndicatorId, kImageSize> order(config.indicator_order);
        StockImage image = build_image_at(series, static_cast<std::size_t>(pick), order);

        std::string entropy_csv = "mode,entropy_bits\n";
        for (NormKind kind :
             {NormKind::GlobalMinMax, NormKind::RowMinMax, NormKind::LogRowMinMax}) {
            Normalization norm{kind, config.norm.epsilon};
            double h = entropy(apply_normalization(image.values, norm), config.entropy_bins);
            entropy_csv += std::string(norm_kind_name(kind)) + "," + fmt(h) + "\n";
        }
        write_text(dir / "entropy.csv", entropy_csv);

        for (auto [mode, name] : {std::pair{ChiSquareMode::Scaled, "scaled"},
                                  std::pair{ChiSquareMode::Raw, "raw"}}) {
            ChiSquareReport rep = chi_square_rows(image.values, config.chi_square_alpha, mode);
            std::string csv = "row,indicator,statistic,critical_value,rejected\n";
            for (int i = 0; i < kImageSize - 1; ++i) {
                csv += std::to_string(i + 2) + "," +
                       std::string(indicator_name(config.indicator_order[i + 1])) + "," +
                       fmt(rep.statistics[i]) + "," + fmt(rep.critical_value) + "," +
                       (rep.rejected[i] ? "1" : "0") + "\n";
            }
            write_text(dir / (std::string("chi_square_") + name + ".csv"), csv);
        }

        IndicatorId burst_id = indicator_from_name(config.burst_indicator);
        // Clip the export range to days with enough history for the indicator.
        std::size_t first_valid = lookback_bars(burst_id, config.burst_period) - 1;
        if (first_valid >= series.bars.size()) {
            throw std::runtime_error(ticker + ": too little history for " +
                                     config.burst_indicator + "(" +
                                     std::to_string(config.burst_period) + ")");
        }
        Date burst_from = std::max(config.split.train_start, series.bars[first_valid].date);
        BurstinessTables tables =
            burstiness_export(series, burst_id, config.burst_period, burst_from,
                              config.split.train_end, config.burst_bins);
        std::string stem = config.burst_indicator + "_" + std::to_string(config.burst_period);
        std::string series_csv = "date,value\n";
        for (const auto& [d, v] : tables.series) {
            series_csv += d.to_string() + "," + fmt(v) + "\n";
        }
        write_text(dir / ("burst_" + stem + "_series.csv"), series_csv);
        std::string hist_csv = "bin_low,bin_high,count\n";
        for (const auto& bin : tables.histogram) {
            hist_csv += fmt(bin.lo) + "," + fmt(bin.hi) + "," + std::to_string(bin.count) + "\n";
        }
        write_text(dir / ("burst_" + stem + "_hist.csv"), hist_csv);

        log << ticker << ": diagnostics at " << image.date.to_string() << " written to "
            << dir.string() << "\n";
    }
}

std::vector<DatasetSummary> cmd_build_dataset(const RunConfig& config, std::ostream& log) {
    std::vector<DatasetSummary> summaries;
    for (const auto& ticker : config.tickers) {
        PriceSeries series = load_ticker(config, ticker);

        DatasetBuildOptions options;
        options.norm = config.norm;
        options.label_window = config.label_window;
        options.label_window_len = config.label_window_len;
        options.indicator_order = config.indicator_order;
        auto [train_ds, test_ds] = build_dataset(series, config.split, options);

        std::filesystem::create_directories(config.ticker_dir(ticker));
        save_dataset(train_ds, artifacts::dataset(config, ticker, "train"));
        save_dataset(test_ds, artifacts::dataset(config, ticker, "test"));

        DatasetSummary summary;
        summary.ticker = ticker;
        summary.train_counts = train_ds.label_counts();
        summary.test_counts = test_ds.label_counts();
        summaries.push_back(summary);

        log << ticker << ": train " << train_ds.items.size() << " items (buy "
            << summary.train_counts[0] << ", sell " << summary.train_counts[1] << ", hold "
            << summary.train_counts[2] << "), test " << test_ds.items.size() << " items (buy "
            << summary.test_counts[0] << ", sell " << summary.test_counts[1] << ", hold "
            << summary.test_counts[2] << ")\n";

        nlohmann::json j;
        j["ticker"] = ticker;
        for (auto [counts, split] :
             {std::pair{&summary.train_counts, "train"}, std::pair{&summary.test_counts, "test"}}) {
            j[split] = {{"buy", (*counts)[0]}, {"sell", (*counts)[1]}, {"hold", (*counts)[2]}};
        }
        write_text(config.ticker_dir(ticker) / "label_summary.json", j.dump(2) + "\n");
    }
    return summaries;
}

void cmd_train(const RunConfig& config, std::ostream& log) {
    for (const auto& ticker : config.tickers) {
        auto train_path = artifacts::dataset(config, ticker, "train");
        require_artifact(train_path, "build-dataset");
        std::span<const IndicatorId, kImageSize> order(config.indicator_order);
        Dataset train_ds = load_dataset(train_path, order);

        TrainConfig tc = config.train;
        tc.seed = config.seed ^ fnv1a(ticker);  // per-ticker stream, still config-seeded

        CnnModel model = init_model(CnnArch{}, tc.seed);
        TrainHistory history = train(model, train_ds, tc);
        save_model(model, artifacts::cnn_checkpoint(config, ticker), &tc);

        std::string csv = "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
        for (const auto& e : history.epochs) {
            csv += std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," +
                   fmt(e.train_accuracy) + "," + fmt(e.val_loss) + "," + fmt(e.val_accuracy) +
                   "\n";
        }
        write_text(artifacts::train_history(config, ticker), csv);

        LassoFit lasso = fit_lasso(train_ds, config.baseline);
        save_linear_model(lasso.model, artifacts::lasso_checkpoint(config, ticker));

        log << ticker << ": cnn best epoch " << history.best_epoch << "/"
            << history.epochs.size() << " (val loss " << fmt(history.best_val_loss)
            << "), lasso fitted (lambda " << fmt(config.baseline.lambda) << ")\n";
    }
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
    for (const auto& ticker : config.tickers) {
        EvaluatedTicker eval = evaluate_ticker(config, ticker);
        ClassificationMetrics cnn_m = compute_metrics(eval.cnn_predicted, eval.actual);
        ClassificationMetrics lasso_m = compute_metrics(eval.lasso_predicted, eval.actual);

        write_text(artifacts::metrics_csv(config, ticker, "cnn"), metrics_csv_text(cnn_m));
        write_text(artifacts::metrics_csv(config, ticker, "lasso"), metrics_csv_text(lasso_m));

        nlohmann::json j;
        j["ticker"] = ticker;
        j["cnn"] = metrics_json_object(cnn_m);
        j["lasso"] = metrics_json_object(lasso_m);
        write_text(artifacts::metrics_json(config, ticker), j.dump(2) + "\n");

        log << ticker << ": cnn accuracy " << fmt(cnn_m.accuracy) << ", lasso accuracy "
            << fmt(lasso_m.accuracy) << " over " << cnn_m.total << " test days\n";
    }
}

void cmd_backtest(const RunConfig& config, std::ostream& log) {
    for (const auto& ticker : config.tickers) {
        EvaluatedTicker eval = evaluate_ticker(config, ticker);
        PriceSeries series = load_ticker(config, ticker);

        nlohmann::json summary;
        summary["ticker"] = ticker;
        for (auto [name, preds] : {std::pair{"cnn", &eval.cnn_predicted},
                                   std::pair{"lasso", &eval.lasso_predicted}}) {
            std::vector<std::pair<Date, Label>> predictions;
            for (std::size_t i = 0; i < eval.dates.size(); ++i) {
                predictions.emplace_back(eval.dates[i], (*preds)[i]);
            }
            BacktestResult result = simulate(predictions, series);

            std::string csv = "date,action,price,cash,shares,total\n";
            for (const auto& day : result.daily) {
                csv += day.date.to_string() + "," + std::string(label_name(day.action)) + "," +
                       fmt(day.price) + "," + fmt(day.cash) + "," + fmt(day.shares) + "," +
                       fmt(day.total) + "\n";
            }
            write_text(artifacts::backtest_csv(config, ticker, name), csv);

            summary[name] = {{"initial_value", result.initial_value},
                             {"final_value", result.final_value},
                             {"total_return", result.total_return},
                             {"trade_count", result.trade_count}};
            log << ticker << " " << name << ": return " << fmt(100.0 * result.total_return)
                << "% over " << result.daily.size() << " days, " << result.trade_count
                << " trades\n";
        }
        write_text(artifacts::backtest_json(config, ticker), summary.dump(2) + "\n");
    }
}

Report cmd_report(const RunConfig& config, std::ostream& log) {
    std::vector<TickerOutcome> outcomes;
    for (const auto& ticker : config.tickers) {
        auto metrics_path = artifacts::metrics_json(config, ticker);
        require_artifact(metrics_path, "evaluate");
        auto backtest_path = artifacts::backtest_json(config, ticker);
        require_artifact(backtest_path, "backtest");

        std::ifstream metrics_in(metrics_path);
        nlohmann::json metrics = nlohmann::json::parse(metrics_in);
        std::ifstream backtest_in(backtest_path);
        nlohmann::json backtest = nlohmann::json::parse(backtest_in);

        for (const char* model : {"cnn", "lasso"}) {
            TickerOutcome outcome;
            outcome.ticker = ticker;
            outcome.model = model;
            outcome.accuracy = metrics.at(model).at("accuracy").get<double>();
            outcome.backtest.initial_value =
                backtest.at(model).at("initial_value").get<double>();
            outcome.backtest.final_value = backtest.at(model).at("final_value").get<double>();
            outcome.backtest.total_return = backtest.at(model).at("total_return").get<double>();
            outcome.backtest.trade_count = backtest.at(model).at("trade_count").get<int>();

            // Asset trajectory comes from the per-day backtest CSV.
            std::ifstream csv_in(artifacts::backtest_csv(config, ticker, model));
            if (!csv_in) {
                throw std::runtime_error("missing " +
                                         artifacts::backtest_csv(config, ticker, model).string() +
                                         " (run `cnntrade backtest` first)");
            }
            std::string line;
            std::getline(csv_in, line);  // header
            while (std::getline(csv_in, line)) {
                if (line.empty()) continue;
                auto first_comma = line.find(',');
                auto last_comma = line.rfind(',');
                DayRecord day;
                day.date = Date::parse(line.substr(0, first_comma));
                day.total = std::stod(line.substr(last_comma + 1));
                outcome.backtest.daily.push_back(day);
            }
            outcomes.push_back(std::move(outcome));
        }
    }

    Report report = build_report(outcomes);
    auto dir = artifacts::report_dir(config);

    std::string summary_csv = "ticker,model,accuracy,return\n";
    for (const auto& row : report.summary) {
        summary_csv += row.ticker + "," + row.model + "," + fmt(row.accuracy) + "," +
                       fmt(row.total_return) + "\n";
    }
    write_text(dir / "summary.csv", summary_csv);

    std::string wide_csv = "ticker,cnn_accuracy,cnn_return,lasso_accuracy,lasso_return\n";
    for (const auto& ticker : config.tickers) {
        std::array<double, 4> cells{};
        for (const auto& row : report.summary) {
            if (row.ticker != ticker) continue;
            if (row.model == "cnn") {
                cells[0] = row.accuracy;
                cells[1] = row.total_return;
            } else if (row.model == "lasso") {
                cells[2] = row.accuracy;
                cells[3] = row.total_return;
            }
        }
        wide_csv += ticker + "," + fmt(cells[0]) + "," + fmt(cells[1]) + "," + fmt(cells[2]) +
                    "," + fmt(cells[3]) + "\n";
    }
    write_text(dir / "table_wide.csv", wide_csv);

    for (std::size_t i = 0; i < report.summary.size(); ++i) {
        const auto& row = report.summary[i];
        std::string csv = "date,total\n";
        for (const auto& [date, total] : report.asset_series[i]) {
            csv += date.to_string() + "," + fmt(total) + "\n";
        }
        write_text(dir / ("assets_" + row.ticker + "_" + row.model + ".csv"), csv);
    }

    log << "report: " << report.summary.size() << " rows written to " << dir.string() << "\n";
    return report;
}

}  // namespace cnntrade
