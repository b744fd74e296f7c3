#include "cnntrade/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace cnntrade {

namespace {

constexpr int kSchemaVersion = 1;
constexpr double kFlatGuard = 1e-12;   // treat a range below this as degenerate
constexpr double kDegenerate = 0.5;    // value a constant row/matrix maps to

// Linear interpolation between order statistics (the "type 7" convention):
// quantile q sits at position q * (n - 1) in the sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
    double pos = q * (sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = pos - lo;
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

void require_finite(const ImageMatrix& m) {
    for (double x : m.v) {
        if (!std::isfinite(x)) throw std::invalid_argument("matrix contains non-finite entry");
    }
}

}  // namespace

void Normalization::validate() const {
    if (!(epsilon > 0)) throw std::invalid_argument("normalization epsilon must be > 0");
}

std::string_view norm_kind_name(NormKind kind) {
    switch (kind) {
        case NormKind::GlobalMinMax: return "global_minmax";
        case NormKind::RowMinMax: return "row_minmax";
        case NormKind::LogRowMinMax: return "log_row_minmax";
    }
    throw std::invalid_argument("unknown normalization kind");
}

NormKind norm_kind_from_name(std::string_view name) {
    if (name == "global_minmax") return NormKind::GlobalMinMax;
    if (name == "row_minmax") return NormKind::RowMinMax;
    if (name == "log_row_minmax") return NormKind::LogRowMinMax;
    throw std::invalid_argument("unknown normalization mode '" + std::string(name) + "'");
}

std::string_view label_window_name(LabelWindow w) {
    switch (w) {
        case LabelWindow::Trailing: return "trailing";
        case LabelWindow::Centered: return "centered";
        case LabelWindow::Forward: return "forward";
    }
    throw std::invalid_argument("unknown label window");
}

LabelWindow label_window_from_name(std::string_view name) {
    if (name == "trailing") return LabelWindow::Trailing;
    if (name == "centered") return LabelWindow::Centered;
    if (name == "forward") return LabelWindow::Forward;
    throw std::invalid_argument("unknown label window '" + std::string(name) + "'");
}

Label label_day(const PriceSeries& series, const Date& d, int window_len, LabelWindow window) {
    if (window_len < 2) throw std::invalid_argument("label window must span at least 2 days");
    auto idx = series.index_of(d);
    if (!idx) throw std::runtime_error("no bar for date " + d.to_string());

    std::ptrdiff_t t = static_cast<std::ptrdiff_t>(*idx);
    std::ptrdiff_t first = 0;
    switch (window) {
        case LabelWindow::Trailing: first = t - (window_len - 1); break;
        case LabelWindow::Centered: first = t - window_len / 2; break;
        case LabelWindow::Forward: first = t; break;
    }
    std::ptrdiff_t last = first + window_len - 1;
    if (first < 0 || last >= static_cast<std::ptrdiff_t>(series.bars.size())) {
        throw std::runtime_error("label window for " + d.to_string() +
                                 " runs outside the available history");
    }

    std::vector<double> closes(window_len);
    for (int i = 0; i < window_len; ++i) closes[i] = series.bars[first + i].close;
    std::sort(closes.begin(), closes.end());

    double q1 = quantile_sorted(closes, 0.25);
    double q3 = quantile_sorted(closes, 0.75);
    double c = series.bars[t].close;
    if (c < q1) return Label::Buy;
    if (c > q3) return Label::Sell;
    return Label::Hold;
}

ImageMatrix minmax_normalize(const ImageMatrix& m) {
    require_finite(m);
    auto [mn_it, mx_it] = std::minmax_element(m.v.begin(), m.v.end());
    double mn = *mn_it, mx = *mx_it;
    ImageMatrix out;
    if (mx - mn < kFlatGuard) {
        out.v.fill(kDegenerate);
        return out;
    }
    for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = (m.v[i] - mn) / (mx - mn);
    return out;
}

ImageMatrix rowwise_normalize(const ImageMatrix& m, const std::function<double(double)>& g) {
    require_finite(m);
    ImageMatrix out;
    for (int r = 0; r < kImageSize; ++r) {
        std::array<double, kImageSize> gx;
        for (int c = 0; c < kImageSize; ++c) gx[c] = g(m.at(r, c));
        auto [mn_it, mx_it] = std::minmax_element(gx.begin(), gx.end());
        double mn = *mn_it, mx = *mx_it;
        if (mx - mn < kFlatGuard) {
            for (int c = 0; c < kImageSize; ++c) out.at(r, c) = kDegenerate;
        } else {
            for (int c = 0; c < kImageSize; ++c) out.at(r, c) = (gx[c] - mn) / (mx - mn);
        }
    }
    return out;
}

ImageMatrix log_rowwise_normalize(const ImageMatrix& m, double epsilon) {
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be > 0");
    return rowwise_normalize(m, [epsilon](double x) { return std::log(std::abs(x) + epsilon); });
}

ImageMatrix apply_normalization(const ImageMatrix& m, const Normalization& norm) {
    norm.validate();
    switch (norm.kind) {
        case NormKind::GlobalMinMax: return minmax_normalize(m);
        case NormKind::RowMinMax:
            return rowwise_normalize(m, [](double x) { return x; });
        case NormKind::LogRowMinMax: return log_rowwise_normalize(m, norm.epsilon);
    }
    throw std::invalid_argument("unknown normalization kind");
}

std::array<std::size_t, 3> Dataset::label_counts() const {
    std::array<std::size_t, 3> counts{0, 0, 0};
    for (const auto& item : items) counts[static_cast<int>(item.label)]++;
    return counts;
}

std::pair<Dataset, Dataset> build_dataset(const PriceSeries& series, const SplitSpec& spec,
                                          const DatasetBuildOptions& options) {
    spec.validate();
    options.norm.validate();
    if (series.bars.empty()) throw std::invalid_argument("empty series");

    Dataset train{series.ticker, options.norm, "train", options.indicator_order, {}};
    Dataset test{series.ticker, options.norm, "test", options.indicator_order, {}};

    const std::size_t history_needed = static_cast<std::size_t>(max_lookback(kMaxPeriod));
    for (std::size_t t = 0; t < series.bars.size(); ++t) {
        const Date& d = series.bars[t].date;
        Dataset* out = nullptr;
        if (d >= spec.train_start && d <= spec.train_end) out = &train;
        else if (d >= spec.test_start && d <= spec.test_end) out = &test;
        if (!out) continue;
        if (t + 1 < history_needed) continue;

        Label label;
        try {
            label = label_day(series, d, options.label_window_len, options.label_window);
        } catch (const std::runtime_error&) {
            continue;  // label window incomplete at the series edge
        }
        StockImage image = build_image_at(series, t, options.indicator_order);
        out->items.push_back({d, apply_normalization(image.values, options.norm), label});
    }

    if (train.items.empty()) {
        throw std::runtime_error(series.ticker + ": no eligible training days (need " +
                                 std::to_string(history_needed) + " bars of history plus the label window)");
    }
    if (test.items.empty()) {
        throw std::runtime_error(series.ticker + ": no eligible test days");
    }
    return {std::move(train), std::move(test)};
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());

    nlohmann::json header;
    header["schema"] = "cnntrade.dataset";
    header["version"] = kSchemaVersion;
    header["ticker"] = ds.ticker;
    header["split"] = ds.split;
    header["mode"] = std::string(norm_kind_name(ds.norm.kind));
    header["epsilon"] = ds.norm.epsilon;
    std::vector<std::string> names;
    for (IndicatorId id : ds.indicator_order) names.emplace_back(indicator_name(id));
    header["indicator_order"] = names;
    out << header.dump() << '\n';

    for (const auto& item : ds.items) {
        nlohmann::json rec;
        rec["date"] = item.date.to_string();
        rec["label"] = static_cast<int>(item.label);
        rec["values"] = item.values.v;
        out << rec.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<std::span<const IndicatorId, kImageSize>> expected_order) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("schema", "") != "cnntrade.dataset") {
        throw std::runtime_error(path.string() + ": not a dataset file");
    }
    if (header.value("version", -1) != kSchemaVersion) {
        throw std::runtime_error(path.string() + ": unsupported schema version");
    }

    Dataset ds;
    ds.ticker = header.at("ticker").get<std::string>();
    ds.split = header.at("split").get<std::string>();
    ds.norm.kind = norm_kind_from_name(header.at("mode").get<std::string>());
    ds.norm.epsilon = header.at("epsilon").get<double>();

    auto names = header.at("indicator_order").get<std::vector<std::string>>();
    if (names.size() != kImageSize) {
        throw std::runtime_error(path.string() + ": indicator order must list 15 indicators");
    }
    for (int i = 0; i < kImageSize; ++i) ds.indicator_order[i] = indicator_from_name(names[i]);
    if (expected_order) {
        for (int i = 0; i < kImageSize; ++i) {
            if (ds.indicator_order[i] != (*expected_order)[i]) {
                throw std::runtime_error(path.string() + ": indicator row order mismatch (row " +
                                         std::to_string(i) + " is " + names[i] + ", expected " +
                                         std::string(indicator_name((*expected_order)[i])) + ")");
            }
        }
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        DatasetItem item;
        item.date = Date::parse(rec.at("date").get<std::string>());
        int label = rec.at("label").get<int>();
        if (label < 0 || label > 2) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": label out of range");
        }
        item.label = static_cast<Label>(label);
        auto values = rec.at("values").get<std::vector<double>>();
        if (values.size() != item.values.v.size()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected 225 values");
        }
        for (double x : values) {
            if (!(x >= 0.0 && x <= 1.0)) {
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                         ": value outside [0, 1]");
            }
        }
        std::copy(values.begin(), values.end(), item.values.v.begin());
        ds.items.push_back(std::move(item));
    }
    return ds;
}

}  // namespace cnntrade
