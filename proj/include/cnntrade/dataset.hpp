#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cnntrade/indicators.hpp"
#include "cnntrade/market_data.hpp"

namespace cnntrade {

enum class NormKind {
    GlobalMinMax,   // min-max over the whole matrix
    RowMinMax,      // min-max per indicator row
    LogRowMinMax,   // per-row min-max after x -> log(|x| + epsilon)
};

struct Normalization {
    NormKind kind = NormKind::LogRowMinMax;
    double epsilon = 1e-8;  // log guard; must be > 0

    void validate() const;
};

std::string_view norm_kind_name(NormKind kind);
NormKind norm_kind_from_name(std::string_view name);

// Which 20 trading days the label quartiles are computed over, relative to
// the labeled day d. Forward makes the label a predictive target.
enum class LabelWindow {
    Trailing,  // d-19 .. d
    Centered,  // d-10 .. d+9
    Forward,   // d .. d+19
};

std::string_view label_window_name(LabelWindow w);
LabelWindow label_window_from_name(std::string_view name);

// Buy if close(d) is below the window's first quartile, Sell if above the
// third, Hold otherwise. Quartiles use linear interpolation between order
// statistics. Throws when the window runs off the series.
Label label_day(const PriceSeries& series, const Date& d, int window_len = 20,
                LabelWindow window = LabelWindow::Forward);

// Whole-matrix min-max to [0, 1]; a constant matrix maps to all 0.5.
ImageMatrix minmax_normalize(const ImageMatrix& m);

// Per-row min-max of g(x); rows where g is constant map to all 0.5.
ImageMatrix rowwise_normalize(const ImageMatrix& m, const std::function<double(double)>& g);

// rowwise_normalize with g(x) = log(|x| + epsilon).
ImageMatrix log_rowwise_normalize(const ImageMatrix& m, double epsilon);

ImageMatrix apply_normalization(const ImageMatrix& m, const Normalization& norm);

struct DatasetItem {
    Date date;
    ImageMatrix values;  // entries in [0, 1]
    Label label = Label::Hold;
};

struct Dataset {
    std::string ticker;
    Normalization norm;
    std::string split;  // "train" or "test"
    std::array<IndicatorId, kImageSize> indicator_order = default_indicator_order();
    std::vector<DatasetItem> items;  // ordered by date

    std::array<std::size_t, 3> label_counts() const;
};

struct DatasetBuildOptions {
    Normalization norm;
    LabelWindow label_window = LabelWindow::Forward;
    int label_window_len = 20;
    std::array<IndicatorId, kImageSize> indicator_order = default_indicator_order();
};

// For every day in the split ranges that has full indicator history and a
// complete label window: build_image -> label_day -> normalize.
std::pair<Dataset, Dataset> build_dataset(const PriceSeries& series, const SplitSpec& spec,
                                          const DatasetBuildOptions& options);

// Line-delimited JSON: one header record, then one record per item. Doubles
// are written in shortest round-trip form, so save -> load is lossless.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<std::span<const IndicatorId, kImageSize>> expected_order =
                         std::nullopt);

}  // namespace cnntrade
