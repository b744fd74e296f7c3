#include "cnntrade/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace cnntrade {

namespace {

// Largest eigenvalue of A^T A / n for the bias-augmented design matrix,
// by power iteration.
double lipschitz_estimate(const std::vector<std::vector<double>>& x, int power_iters) {
    const std::size_t n = x.size();
    const std::size_t f = x[0].size() + 1;  // + bias column of ones
    std::vector<double> v(f, 1.0 / std::sqrt(static_cast<double>(f)));
    std::vector<double> xv(n), av(f);
    double eig = 1.0;
    for (int it = 0; it < power_iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = v[f - 1];  // bias column
            for (std::size_t j = 0; j + 1 < f; ++j) acc += x[i][j] * v[j];
            xv[i] = acc;
        }
        std::fill(av.begin(), av.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j + 1 < f; ++j) av[j] += x[i][j] * xv[i];
            av[f - 1] += xv[i];
        }
        double norm = 0;
        for (double a : av) norm += a * a;
        norm = std::sqrt(norm);
        if (norm < 1e-300) return 1.0;
        eig = norm / static_cast<double>(n);
        for (std::size_t j = 0; j < f; ++j) v[j] = av[j] / norm;
    }
    return eig;
}

double objective(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                 const std::vector<double>& w, double b, double lambda) {
    const std::size_t n = x.size();
    double quad = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = b - y[i];
        for (std::size_t j = 0; j < w.size(); ++j) r += x[i][j] * w[j];
        quad += r * r;
    }
    double l1 = 0;
    for (double wj : w) l1 += std::abs(wj);
    return quad / (2.0 * n) + lambda * l1;
}

}  // namespace

void LassoConfig::validate() const {
    if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(tolerance > 0)) throw std::invalid_argument("tolerance must be > 0");
}

double soft_threshold(double x, double threshold) {
    if (x > threshold) return x - threshold;
    if (x < -threshold) return x + threshold;
    return 0.0;
}

double LinearModel::score(int cls, const double* features) const {
    const double* w = weights.data() + static_cast<std::size_t>(cls) * num_features;
    double acc = biases[cls];
    for (int j = 0; j < num_features; ++j) acc += w[j] * features[j];
    return acc;
}

LassoFit fit_lasso(const std::vector<std::vector<double>>& features,
                   const std::vector<int>& labels, int num_classes, const LassoConfig& config) {
    config.validate();
    if (features.empty()) throw std::invalid_argument("empty dataset");
    if (features.size() != labels.size()) throw std::invalid_argument("feature/label mismatch");
    const std::size_t n = features.size();
    const std::size_t f = features[0].size();
    for (const auto& row : features) {
        if (row.size() != f) throw std::invalid_argument("ragged feature matrix");
    }

    LassoFit fit;
    fit.model.num_classes = num_classes;
    fit.model.num_features = static_cast<int>(f);
    fit.model.lambda = config.lambda;
    fit.model.weights.assign(static_cast<std::size_t>(num_classes) * f, 0.0);
    fit.model.biases.assign(num_classes, 0.0);
    fit.objective_history.resize(num_classes);

    // Slight inflation keeps the step strictly below 1/L despite the
    // power-iteration estimate being approximate.
    const double lipschitz = lipschitz_estimate(features, config.power_iters) * 1.01;
    const double step = 1.0 / std::max(lipschitz, 1e-12);

    std::vector<double> y(n), grad(f), residual(n);
    for (int cls = 0; cls < num_classes; ++cls) {
        for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == cls ? 1.0 : -1.0;
        std::vector<double> w(f, 0.0);
        double b = 0;

        auto& history = fit.objective_history[cls];
        history.push_back(objective(features, y, w, b, config.lambda));
        for (int it = 0; it < config.max_iters; ++it) {
            for (std::size_t i = 0; i < n; ++i) {
                double r = b - y[i];
                for (std::size_t j = 0; j < f; ++j) r += features[i][j] * w[j];
                residual[i] = r;
            }
            std::fill(grad.begin(), grad.end(), 0.0);
            double grad_b = 0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < f; ++j) grad[j] += features[i][j] * residual[i];
                grad_b += residual[i];
            }
            for (std::size_t j = 0; j < f; ++j) {
                w[j] = soft_threshold(w[j] - step * grad[j] / n, step * config.lambda);
            }
            b -= step * grad_b / n;

            double obj = objective(features, y, w, b, config.lambda);
            double prev = history.back();
            history.push_back(obj);
            if (std::abs(prev - obj) <= config.tolerance * std::max(1.0, std::abs(prev))) break;
        }

        std::copy(w.begin(), w.end(),
                  fit.model.weights.begin() + static_cast<std::size_t>(cls) * f);
        fit.model.biases[cls] = b;
    }
    return fit;
}

LassoFit fit_lasso(const Dataset& trainset, const LassoConfig& config) {
    if (trainset.items.empty()) throw std::invalid_argument("empty dataset");
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    features.reserve(trainset.items.size());
    for (const auto& item : trainset.items) {
        features.emplace_back(item.values.v.begin(), item.values.v.end());
        labels.push_back(static_cast<int>(item.label));
    }
    return fit_lasso(features, labels, 3, config);
}

Label predict_linear(const LinearModel& model, const ImageMatrix& image) {
    if (model.num_features != static_cast<int>(image.v.size())) {
        throw std::invalid_argument("model/image feature size mismatch");
    }
    int best = 0;
    double best_score = model.score(0, image.v.data());
    for (int cls = 1; cls < model.num_classes; ++cls) {
        double s = model.score(cls, image.v.data());
        if (s > best_score) {
            best_score = s;
            best = cls;
        }
    }
    return static_cast<Label>(best);
}

namespace {
constexpr char kMagic[8] = {'C', 'N', 'T', 'L', 'I', 'N', 'R', '1'};
}

void save_linear_model(const LinearModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());

    nlohmann::json header;
    header["num_classes"] = model.num_classes;
    header["num_features"] = model.num_features;
    header["lambda"] = model.lambda;
    std::string text = header.dump();

    out.write(kMagic, sizeof(kMagic));
    std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(model.weights.data()),
              static_cast<std::streamsize>(model.weights.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(model.biases.data()),
              static_cast<std::streamsize>(model.biases.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

LinearModel load_linear_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw std::runtime_error(path.string() + ": not a linear model checkpoint");
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error(path.string() + ": truncated header");
    nlohmann::json header = nlohmann::json::parse(text);

    LinearModel model;
    model.num_classes = header.at("num_classes").get<int>();
    model.num_features = header.at("num_features").get<int>();
    model.lambda = header.at("lambda").get<double>();
    model.weights.resize(static_cast<std::size_t>(model.num_classes) * model.num_features);
    model.biases.resize(model.num_classes);
    in.read(reinterpret_cast<char*>(model.weights.data()),
            static_cast<std::streamsize>(model.weights.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(model.biases.data()),
            static_cast<std::streamsize>(model.biases.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path.string() + ": truncated parameters");
    return model;
}

}  // namespace cnntrade
