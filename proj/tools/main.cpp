#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cnntrade/commands.hpp"

namespace {

struct Overrides {
    std::optional<std::string> output_dir;
    std::optional<std::string> data_dir;
    std::optional<std::string> tickers;  // comma-separated
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_epochs;
};

cnntrade::RunConfig load_config(const std::string& path, const Overrides& o) {
    cnntrade::RunConfig cfg = cnntrade::parse_config(path);
    if (o.output_dir) cfg.output_dir = *o.output_dir;
    if (o.data_dir) cfg.data_dir = *o.data_dir;
    if (o.tickers) {
        cfg.tickers.clear();
        std::stringstream ss(*o.tickers);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) cfg.tickers.push_back(item);
        }
    }
    if (o.mode) cfg.norm.kind = cnntrade::norm_kind_from_name(*o.mode);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.train.seed = *o.seed;
    }
    if (o.max_epochs) cfg.train.max_epochs = *o.max_epochs;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CNN stock-trading pipeline: indicator images, normalization, "
                 "training, evaluation, and backtesting"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;
    app.add_option("--config", config_path, "Path to the run config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--output-dir", [&overrides](const std::vector<std::string>& v) {
        overrides.output_dir = v.front();
        return true;
    }, "Override output_dir");
    app.add_option("--data-dir", [&overrides](const std::vector<std::string>& v) {
        overrides.data_dir = v.front();
        return true;
    }, "Override data_dir");
    app.add_option("--tickers", [&overrides](const std::vector<std::string>& v) {
        overrides.tickers = v.front();
        return true;
    }, "Override ticker list (comma-separated)");
    app.add_option("--mode", [&overrides](const std::vector<std::string>& v) {
        overrides.mode = v.front();
        return true;
    }, "Override normalization mode (global_minmax|row_minmax|log_row_minmax)");
    app.add_option("--seed", [&overrides](const std::vector<std::string>& v) {
        overrides.seed = std::stoull(v.front());
        return true;
    }, "Override the run seed");
    app.add_option("--max-epochs", [&overrides](const std::vector<std::string>& v) {
        overrides.max_epochs = std::stoi(v.front());
        return true;
    }, "Override training epoch cap");

    auto* ingest = app.add_subcommand("ingest", "Validate the per-ticker OHLCV CSV files");
    auto* diagnose = app.add_subcommand(
        "diagnose", "Entropy, chi-square, and burstiness diagnostics per ticker");
    auto* build = app.add_subcommand("build-dataset",
                                     "Build normalized, labeled train/test datasets");
    auto* train = app.add_subcommand("train", "Train the CNN and the Lasso baseline");
    auto* evaluate = app.add_subcommand("evaluate", "Classification metrics on the test set");
    auto* backtest = app.add_subcommand("backtest", "Simulate the trading protocol");
    auto* report = app.add_subcommand("report", "Merge per-ticker results into summary tables");

    CLI11_PARSE(app, argc, argv);

    std::string command;
    try {
        cnntrade::RunConfig cfg = load_config(config_path, overrides);
        if (ingest->parsed()) {
            command = "ingest";
            auto result = cnntrade::cmd_ingest(cfg, std::cout);
            // Per-file problems are reported, not fatal; only a fully empty
            // ingest is an error.
            if (result.failures == result.entries.size()) {
                throw std::runtime_error("no ticker file could be ingested");
            }
        } else if (diagnose->parsed()) {
            command = "diagnose";
            cnntrade::cmd_diagnose(cfg, std::cout);
        } else if (build->parsed()) {
            command = "build-dataset";
            cnntrade::cmd_build_dataset(cfg, std::cout);
        } else if (train->parsed()) {
            command = "train";
            cnntrade::cmd_train(cfg, std::cout);
        } else if (evaluate->parsed()) {
            command = "evaluate";
            cnntrade::cmd_evaluate(cfg, std::cout);
        } else if (backtest->parsed()) {
            command = "backtest";
            cnntrade::cmd_backtest(cfg, std::cout);
        } else if (report->parsed()) {
            command = "report";
            cnntrade::cmd_report(cfg, std::cout);
        }
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = e.what();
        if (!command.empty()) err["command"] = command;
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
