#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "cnntrade/dataset.hpp"
#include "cnntrade/indicators.hpp"

namespace cnntrade {

// One-vs-rest linear regression onto +/-1 targets with an L1 penalty, one
// weight row per class over the flattened image.
struct LinearModel {
    int num_classes = 3;
    int num_features = kImageSize * kImageSize;
    std::vector<double> weights;  // [class][feature]
    std::vector<double> biases;   // [class]
    double lambda = 0;

    double score(int cls, const double* features) const;
};

struct LassoConfig {
    double lambda = 0.01;
    int max_iters = 10000;
    double tolerance = 1e-8;  // relative objective change
    int power_iters = 50;     // for the Lipschitz estimate

    void validate() const;
};

struct LassoFit {
    LinearModel model;
    // Penalized objective value per proximal-gradient iteration, per class.
    std::vector<std::vector<double>> objective_history;
};

double soft_threshold(double x, double threshold);

// Proximal gradient (ISTA) with step 1/L, L estimated by power iteration on
// the quadratic part. The bias column is unpenalized.
LassoFit fit_lasso(const std::vector<std::vector<double>>& features,
                   const std::vector<int>& labels, int num_classes, const LassoConfig& config);
LassoFit fit_lasso(const Dataset& trainset, const LassoConfig& config);

Label predict_linear(const LinearModel& model, const ImageMatrix& image);

// Same checkpoint framing as the CNN: magic + JSON header + raw doubles.
void save_linear_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_linear_model(const std::filesystem::path& path);

}  // namespace cnntrade
