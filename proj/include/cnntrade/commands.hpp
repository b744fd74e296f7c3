#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cnntrade/backtest.hpp"
#include "cnntrade/config.hpp"

namespace cnntrade {

// Pipeline commands, one per CLI subcommand. Each validates its
// prerequisites, writes its artifacts under config.output_dir, and logs a
// short status line per ticker to `log`. A missing prerequisite error names
// both the missing file and the command that produces it.

struct IngestEntry {
    std::string ticker;
    std::string file;
    std::size_t rows = 0;
    Date first_date, last_date;
    std::string error;  // non-empty when the file failed to load
};

struct IngestReport {
    std::vector<IngestEntry> entries;
    std::size_t failures = 0;
};

IngestReport cmd_ingest(const RunConfig& config, std::ostream& log);

void cmd_diagnose(const RunConfig& config, std::ostream& log);

struct DatasetSummary {
    std::string ticker;
    std::array<std::size_t, 3> train_counts{};  // buy/sell/hold
    std::array<std::size_t, 3> test_counts{};
};

std::vector<DatasetSummary> cmd_build_dataset(const RunConfig& config, std::ostream& log);

void cmd_train(const RunConfig& config, std::ostream& log);

void cmd_evaluate(const RunConfig& config, std::ostream& log);

void cmd_backtest(const RunConfig& config, std::ostream& log);

Report cmd_report(const RunConfig& config, std::ostream& log);

// Artifact locations, shared between producers and consumers.
namespace artifacts {
std::filesystem::path dataset(const RunConfig& c, const std::string& ticker,
                              const std::string& split);
std::filesystem::path cnn_checkpoint(const RunConfig& c, const std::string& ticker);
std::filesystem::path lasso_checkpoint(const RunConfig& c, const std::string& ticker);
std::filesystem::path train_history(const RunConfig& c, const std::string& ticker);
std::filesystem::path metrics_json(const RunConfig& c, const std::string& ticker);
std::filesystem::path metrics_csv(const RunConfig& c, const std::string& ticker,
                                  const std::string& model);
std::filesystem::path backtest_csv(const RunConfig& c, const std::string& ticker,
                                   const std::string& model);
std::filesystem::path backtest_json(const RunConfig& c, const std::string& ticker);
std::filesystem::path report_dir(const RunConfig& c);
}  // namespace artifacts

}  // namespace cnntrade
