#include "cnntrade/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cnntrade {

namespace {

constexpr int kConfigVersion = 1;

Date date_field(const nlohmann::json& j, const char* key) {
    return Date::parse(j.at(key).get<std::string>());
}

}  // namespace

std::filesystem::path RunConfig::ticker_dir(const std::string& ticker) const {
    return output_dir / ticker;
}

std::filesystem::path RunConfig::csv_path(const std::string& ticker) const {
    return data_dir / (ticker + ".csv");
}

void RunConfig::validate() const {
    if (tickers.empty()) throw std::invalid_argument("config: ticker list is empty");
    if (data_dir.empty()) throw std::invalid_argument("config: data_dir is required");
    if (output_dir.empty()) throw std::invalid_argument("config: output_dir is required");
    split.validate();
    norm.validate();
    train.validate();
    baseline.validate();
    if (label_window_len < 2) throw std::invalid_argument("config: label window too short");
    if (entropy_bins < 1) throw std::invalid_argument("config: entropy_bins must be >= 1");
    if (!(chi_square_alpha > 0 && chi_square_alpha < 1)) {
        throw std::invalid_argument("config: chi_square_alpha must be in (0, 1)");
    }
    if (burst_period < 1) throw std::invalid_argument("config: burst_period must be >= 1");
    if (burst_bins < 1) throw std::invalid_argument("config: burst_bins must be >= 1");
    indicator_from_name(burst_indicator);  // throws on unknown

    std::set<IndicatorId> seen(indicator_order.begin(), indicator_order.end());
    if (seen.size() != indicator_order.size()) {
        throw std::invalid_argument("config: indicator_order must not repeat indicators");
    }
}

RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }

    if (j.value("version", kConfigVersion) != kConfigVersion) {
        throw std::invalid_argument("config: unsupported version");
    }

    RunConfig cfg;
    auto resolve = [&base_dir](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    cfg.data_dir = resolve(j.at("data_dir").get<std::string>());
    cfg.output_dir = resolve(j.at("output_dir").get<std::string>());
    cfg.tickers = j.at("tickers").get<std::vector<std::string>>();

    const auto& split = j.at("split");
    cfg.split.train_start = date_field(split, "train_start");
    cfg.split.train_end = date_field(split, "train_end");
    cfg.split.test_start = date_field(split, "test_start");
    cfg.split.test_end = date_field(split, "test_end");

    if (j.contains("normalization")) {
        const auto& norm = j.at("normalization");
        cfg.norm.kind = norm_kind_from_name(norm.value("mode", "log_row_minmax"));
        cfg.norm.epsilon = norm.value("epsilon", 1e-8);
    }
    if (j.contains("label_window")) {
        const auto& lw = j.at("label_window");
        cfg.label_window = label_window_from_name(lw.value("direction", "forward"));
        cfg.label_window_len = lw.value("length", 20);
    }
    if (j.contains("indicator_order")) {
        auto names = j.at("indicator_order").get<std::vector<std::string>>();
        if (names.size() != kImageSize) {
            throw std::invalid_argument("config: indicator_order must list exactly 15 names");
        }
        for (int i = 0; i < kImageSize; ++i) {
            cfg.indicator_order[i] = indicator_from_name(names[i]);
        }
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
        std::string opt = t.value("optimizer", "adam");
        if (opt == "adam") cfg.train.optimizer = Optimizer::Adam;
        else if (opt == "sgd") cfg.train.optimizer = Optimizer::Sgd;
        else throw std::invalid_argument("config: optimizer must be 'adam' or 'sgd'");
        cfg.train.beta1 = t.value("beta1", cfg.train.beta1);
        cfg.train.beta2 = t.value("beta2", cfg.train.beta2);
        cfg.train.adam_epsilon = t.value("epsilon", cfg.train.adam_epsilon);
        cfg.train.patience = t.value("patience", cfg.train.patience);
        cfg.train.validation_fraction =
            t.value("validation_fraction", cfg.train.validation_fraction);
        cfg.train.class_weights = t.value("class_weights", cfg.train.class_weights);
    }
    if (j.contains("baseline")) {
        const auto& b = j.at("baseline");
        cfg.baseline.lambda = b.value("lambda", cfg.baseline.lambda);
        cfg.baseline.max_iters = b.value("max_iters", cfg.baseline.max_iters);
        cfg.baseline.tolerance = b.value("tolerance", cfg.baseline.tolerance);
    }
    if (j.contains("diagnostics")) {
        const auto& d = j.at("diagnostics");
        cfg.entropy_bins = d.value("entropy_bins", cfg.entropy_bins);
        cfg.chi_square_alpha = d.value("chi_square_alpha", cfg.chi_square_alpha);
        cfg.burst_indicator = d.value("burst_indicator", cfg.burst_indicator);
        cfg.burst_period = d.value("burst_period", cfg.burst_period);
        cfg.burst_bins = d.value("burst_bins", cfg.burst_bins);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.train.seed = cfg.seed;  // all randomness flows from the config seed

    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.parent_path());
}

}  // namespace cnntrade
