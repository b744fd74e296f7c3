#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cnntrade/dataset.hpp"
#include "cnntrade/indicators.hpp"
#include "cnntrade/rng.hpp"
#include "cnntrade/tensor.hpp"

namespace cnntrade {

// Architecture constants. Defaults give the shape chain
// 15x15 -> 12x12x32 -> 9x9x64 -> 4x4x64 -> 1024 -> 128 -> 3.
struct CnnArch {
    int input_size = 15;
    int kernel = 4;
    int conv1_filters = 32;
    int conv2_filters = 64;
    int hidden_units = 128;
    int num_classes = 3;
    double dropout_rate = 0.3;

    int conv1_out() const { return input_size - kernel + 1; }
    int conv2_out() const { return conv1_out() - kernel + 1; }
    int pool_out() const { return conv2_out() / 2; }
    int flat_size() const { return pool_out() * pool_out() * conv2_filters; }

    void validate() const;  // throws std::logic_error on an impossible chain
};

// All learnable parameters. Layouts: conv1_w [f][ky][kx], conv2_w
// [f][ky][kx][c], dense1_w [unit][flat], dense2_w [class][unit].
struct CnnModel {
    CnnArch arch;
    std::vector<double> conv1_w, conv1_b;
    std::vector<double> conv2_w, conv2_b;
    std::vector<double> dense1_w, dense1_b;
    std::vector<double> dense2_w, dense2_b;

    std::size_t param_count() const;
};

// Named mutable views over a model's parameter blocks, in checkpoint order.
struct ParamView {
    const char* name;
    double* data;
    std::size_t size;
};
std::vector<ParamView> param_views(CnnModel& model);

// Variance-scaled uniform init (fan-in based), zero biases.
CnnModel init_model(const CnnArch& arch, std::uint64_t seed);

// Standalone layer ops. Convolution is valid (no padding), stride 1,
// cross-correlation plus bias followed by sigmoid.
Tensor conv2d_forward(const Tensor& input, const Tensor& filters,
                      const std::vector<double>& biases);
// 2x2 max pooling, stride 2, trailing odd row/column dropped. argmax (flat
// indices into the input) is recorded for the backward pass when given.
Tensor maxpool_forward(const Tensor& input, std::vector<int>* argmax = nullptr);

struct ForwardCache {
    std::vector<double> input;           // input_size^2
    std::vector<double> a1;              // conv1 activations
    std::vector<double> a2;              // conv2 activations
    std::vector<double> pool;            // pooled activations == flatten
    std::vector<int> pool_argmax;
    std::vector<double> hidden;          // dense1 activations (post-sigmoid)
    std::vector<double> hidden_dropped;  // after inverted dropout at train time
    std::vector<double> dropout_mask;    // 1 = kept
    std::vector<double> probs;
    double loss = 0;  // set when a label is supplied
};

// Full forward pass. `rng` supplies the dropout mask and is required when
// training is true and the dropout rate is positive.
void forward_cache(const CnnModel& model, const ImageMatrix& image, bool training, Rng* rng,
                   ForwardCache& cache);
std::array<double, 3> forward(const CnnModel& model, const ImageMatrix& image,
                              bool training = false, Rng* rng = nullptr);

struct Gradients {
    std::vector<double> conv1_w, conv1_b;
    std::vector<double> conv2_w, conv2_b;
    std::vector<double> dense1_w, dense1_b;
    std::vector<double> dense2_w, dense2_b;

    static Gradients zeros(const CnnArch& arch);
};
std::vector<ParamView> param_views(Gradients& grads, const CnnArch& arch);

// Gradients of the mean cross-entropy loss over the batch w.r.t. every
// parameter. With `dropout_rng` set, each sample draws a dropout mask that
// is shared between its forward and backward pass; otherwise dropout is off.
Gradients backward(const CnnModel& model, std::span<const ImageMatrix> batch,
                   std::span<const Label> labels, Rng* dropout_rng = nullptr,
                   double* loss_out = nullptr);

// Mean cross-entropy loss, dropout off. Used by training bookkeeping and by
// the finite-difference tests.
double batch_loss(const CnnModel& model, std::span<const ImageMatrix> batch,
                  std::span<const Label> labels);

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 200;
    Optimizer optimizer = Optimizer::Adam;
    double beta1 = 0.9, beta2 = 0.999, adam_epsilon = 1e-8;
    std::uint64_t seed = 42;
    int patience = 20;               // epochs without improvement before stopping
    double validation_fraction = 0.1;  // chronological tail of the training set
    bool class_weights = false;      // inverse-frequency loss weights

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0, train_accuracy = 0;
    double val_loss = 0, val_accuracy = 0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;
    double best_val_loss = 0;
};

// Mini-batch training, deterministic given (dataset, config, model init).
// train_loss is the average over training batches (dropout active);
// validation metrics use dropout-off forward passes. The parameters from the
// best validation epoch are restored on return. Throws on a non-finite loss.
TrainHistory train(CnnModel& model, const Dataset& trainset, const TrainConfig& config);

Label predict(const CnnModel& model, const ImageMatrix& image);

// Binary checkpoint: magic + version + JSON header (architecture, config,
// seed) + raw parameter doubles in declared order. Round-trips bit-exactly.
void save_model(const CnnModel& model, const std::filesystem::path& path,
                const TrainConfig* config = nullptr);
CnnModel load_model(const std::filesystem::path& path);

}  // namespace cnntrade
