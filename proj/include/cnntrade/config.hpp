#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "cnntrade/cnn.hpp"
#include "cnntrade/dataset.hpp"
#include "cnntrade/lasso.hpp"
#include "cnntrade/market_data.hpp"

namespace cnntrade {

// One experiment manifest: everything the pipeline needs, from one JSON
// file. All randomness flows from `seed`.
struct RunConfig {
    std::filesystem::path data_dir;
    std::vector<std::string> tickers;
    SplitSpec split;
    Normalization norm;
    LabelWindow label_window = LabelWindow::Forward;
    int label_window_len = 20;
    std::array<IndicatorId, kImageSize> indicator_order = default_indicator_order();
    TrainConfig train;
    LassoConfig baseline;
    int entropy_bins = 256;
    double chi_square_alpha = 0.01;
    std::string burst_indicator = "rsi";
    int burst_period = 14;
    int burst_bins = 30;
    std::filesystem::path output_dir;
    std::uint64_t seed = 42;

    std::filesystem::path ticker_dir(const std::string& ticker) const;
    std::filesystem::path csv_path(const std::string& ticker) const;

    // Structural validation; rejects impossible settings before any work.
    void validate() const;
};

RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir);

}  // namespace cnntrade
