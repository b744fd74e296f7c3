#include "cnntrade/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace cnntrade {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out[y][x][f] = sigmoid( sum_{ky,kx,c} in[y+ky][x+kx][c] * w[f][ky][kx][c] + b[f] )
void conv_sigmoid(const double* in, int H, int W, int C, const double* w, const double* b,
                  int F, int K, double* out) {
    const int OH = H - K + 1, OW = W - K + 1;
    for (int y = 0; y < OH; ++y) {
        for (int x = 0; x < OW; ++x) {
            for (int f = 0; f < F; ++f) {
                double acc = b[f];
                const double* wf = w + static_cast<std::size_t>(f) * K * K * C;
                for (int ky = 0; ky < K; ++ky) {
                    const double* row = in + ((y + ky) * W + x) * C;
                    const double* wrow = wf + ky * K * C;
                    for (int kx = 0; kx < K; ++kx) {
                        const double* pix = row + kx * C;
                        const double* wpix = wrow + kx * C;
                        for (int c = 0; c < C; ++c) acc += pix[c] * wpix[c];
                    }
                }
                out[(y * OW + x) * F + f] = sigmoid(acc);
            }
        }
    }
}

void maxpool2(const double* in, int H, int W, int F, double* out, int* argmax) {
    const int OH = H / 2, OW = W / 2;
    for (int y = 0; y < OH; ++y) {
        for (int x = 0; x < OW; ++x) {
            for (int f = 0; f < F; ++f) {
                int best = ((2 * y) * W + 2 * x) * F + f;
                double best_v = in[best];
                const int cand[3] = {((2 * y) * W + 2 * x + 1) * F + f,
                                     ((2 * y + 1) * W + 2 * x) * F + f,
                                     ((2 * y + 1) * W + 2 * x + 1) * F + f};
                for (int idx : cand) {
                    if (in[idx] > best_v) {
                        best_v = in[idx];
                        best = idx;
                    }
                }
                out[(y * OW + x) * F + f] = best_v;
                if (argmax) argmax[(y * OW + x) * F + f] = best;
            }
        }
    }
}

void dense_forward(const double* in, int n_in, const double* w, const double* b, int n_out,
                   double* out) {
    for (int i = 0; i < n_out; ++i) {
        const double* wi = w + static_cast<std::size_t>(i) * n_in;
        double acc = b[i];
        for (int j = 0; j < n_in; ++j) acc += wi[j] * in[j];
        out[i] = acc;
    }
}

void softmax(const double* z, int n, double* out) {
    double mx = z[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, z[i]);
    double sum = 0;
    for (int i = 0; i < n; ++i) {
        out[i] = std::exp(z[i] - mx);
        sum += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= sum;
}

std::vector<double> snapshot(CnnModel& model) {
    std::vector<double> flat;
    for (const auto& view : param_views(model)) {
        flat.insert(flat.end(), view.data, view.data + view.size);
    }
    return flat;
}

void restore(CnnModel& model, const std::vector<double>& flat) {
    std::size_t offset = 0;
    for (const auto& view : param_views(model)) {
        std::copy(flat.begin() + offset, flat.begin() + offset + view.size, view.data);
        offset += view.size;
    }
}

}  // namespace

void CnnArch::validate() const {
    if (input_size < kernel || conv1_out() < kernel) {
        throw std::logic_error("input too small for two valid convolutions");
    }
    if (conv2_out() < 2) throw std::logic_error("conv2 output too small for 2x2 pooling");
    if (conv1_filters < 1 || conv2_filters < 1 || hidden_units < 1 || num_classes < 2) {
        throw std::logic_error("layer sizes must be positive");
    }
    if (dropout_rate < 0 || dropout_rate >= 1) {
        throw std::logic_error("dropout rate must be in [0, 1)");
    }
}

std::size_t CnnModel::param_count() const {
    std::size_t n = 0;
    for (const auto& view : param_views(const_cast<CnnModel&>(*this))) n += view.size;
    return n;
}

std::vector<ParamView> param_views(CnnModel& m) {
    return {
        {"conv1_w", m.conv1_w.data(), m.conv1_w.size()},
        {"conv1_b", m.conv1_b.data(), m.conv1_b.size()},
        {"conv2_w", m.conv2_w.data(), m.conv2_w.size()},
        {"conv2_b", m.conv2_b.data(), m.conv2_b.size()},
        {"dense1_w", m.dense1_w.data(), m.dense1_w.size()},
        {"dense1_b", m.dense1_b.data(), m.dense1_b.size()},
        {"dense2_w", m.dense2_w.data(), m.dense2_w.size()},
        {"dense2_b", m.dense2_b.data(), m.dense2_b.size()},
    };
}

std::vector<ParamView> param_views(Gradients& g, const CnnArch&) {
    return {
        {"conv1_w", g.conv1_w.data(), g.conv1_w.size()},
        {"conv1_b", g.conv1_b.data(), g.conv1_b.size()},
        {"conv2_w", g.conv2_w.data(), g.conv2_w.size()},
        {"conv2_b", g.conv2_b.data(), g.conv2_b.size()},
        {"dense1_w", g.dense1_w.data(), g.dense1_w.size()},
        {"dense1_b", g.dense1_b.data(), g.dense1_b.size()},
        {"dense2_w", g.dense2_w.data(), g.dense2_w.size()},
        {"dense2_b", g.dense2_b.data(), g.dense2_b.size()},
    };
}

CnnModel init_model(const CnnArch& arch, std::uint64_t seed) {
    arch.validate();
    CnnModel m;
    m.arch = arch;
    const int K = arch.kernel;
    m.conv1_w.resize(static_cast<std::size_t>(arch.conv1_filters) * K * K);
    m.conv1_b.assign(arch.conv1_filters, 0.0);
    m.conv2_w.resize(static_cast<std::size_t>(arch.conv2_filters) * K * K * arch.conv1_filters);
    m.conv2_b.assign(arch.conv2_filters, 0.0);
    m.dense1_w.resize(static_cast<std::size_t>(arch.hidden_units) * arch.flat_size());
    m.dense1_b.assign(arch.hidden_units, 0.0);
    m.dense2_w.resize(static_cast<std::size_t>(arch.num_classes) * arch.hidden_units);
    m.dense2_b.assign(arch.num_classes, 0.0);

    Rng rng(seed);
    auto fill_uniform = [&rng](std::vector<double>& w, int fan_in) {
        double bound = std::sqrt(3.0 / fan_in);
        for (double& x : w) x = rng.uniform(-bound, bound);
    };
    fill_uniform(m.conv1_w, K * K);
    fill_uniform(m.conv2_w, K * K * arch.conv1_filters);
    fill_uniform(m.dense1_w, arch.flat_size());
    fill_uniform(m.dense2_w, arch.hidden_units);
    return m;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& filters,
                      const std::vector<double>& biases) {
    input.check();
    filters.check();
    if (input.shape.size() != 3) throw std::invalid_argument("conv input must be HxWxC");
    if (filters.shape.size() != 4) throw std::invalid_argument("filters must be FxKxKxC");
    const int H = input.shape[0], W = input.shape[1], C = input.shape[2];
    const int F = filters.shape[0], K = filters.shape[1];
    if (filters.shape[2] != K || filters.shape[3] != C) {
        throw std::invalid_argument("filter shape does not match input channels");
    }
    if (H < K || W < K) throw std::invalid_argument("input smaller than kernel");
    if (biases.size() != static_cast<std::size_t>(F)) {
        throw std::invalid_argument("bias count does not match filter count");
    }
    Tensor out = Tensor::zeros({H - K + 1, W - K + 1, F});
    conv_sigmoid(input.data.data(), H, W, C, filters.data.data(), biases.data(), F, K,
                 out.data.data());
    return out;
}

Tensor maxpool_forward(const Tensor& input, std::vector<int>* argmax) {
    input.check();
    if (input.shape.size() != 3) throw std::invalid_argument("pool input must be HxWxF");
    const int H = input.shape[0], W = input.shape[1], F = input.shape[2];
    if (H < 2 || W < 2) throw std::invalid_argument("pool input must be at least 2x2");
    Tensor out = Tensor::zeros({H / 2, W / 2, F});
    if (argmax) argmax->assign(out.data.size(), 0);
    maxpool2(input.data.data(), H, W, F, out.data.data(), argmax ? argmax->data() : nullptr);
    return out;
}

void forward_cache(const CnnModel& model, const ImageMatrix& image, bool training, Rng* rng,
                   ForwardCache& cache) {
    const CnnArch& a = model.arch;
    const int S = a.input_size, K = a.kernel;
    const int O1 = a.conv1_out(), O2 = a.conv2_out(), P = a.pool_out();
    if (S != kImageSize) throw std::logic_error("model input size does not match image size");

    cache.input.assign(image.v.begin(), image.v.end());
    cache.a1.resize(static_cast<std::size_t>(O1) * O1 * a.conv1_filters);
    cache.a2.resize(static_cast<std::size_t>(O2) * O2 * a.conv2_filters);
    cache.pool.resize(static_cast<std::size_t>(P) * P * a.conv2_filters);
    cache.pool_argmax.resize(cache.pool.size());
    cache.hidden.resize(a.hidden_units);
    cache.probs.resize(a.num_classes);

    conv_sigmoid(cache.input.data(), S, S, 1, model.conv1_w.data(), model.conv1_b.data(),
                 a.conv1_filters, K, cache.a1.data());
    conv_sigmoid(cache.a1.data(), O1, O1, a.conv1_filters, model.conv2_w.data(),
                 model.conv2_b.data(), a.conv2_filters, K, cache.a2.data());
    maxpool2(cache.a2.data(), O2, O2, a.conv2_filters, cache.pool.data(),
             cache.pool_argmax.data());

    std::vector<double> z1(a.hidden_units);
    dense_forward(cache.pool.data(), a.flat_size(), model.dense1_w.data(), model.dense1_b.data(),
                  a.hidden_units, z1.data());
    for (int i = 0; i < a.hidden_units; ++i) cache.hidden[i] = sigmoid(z1[i]);

    if (training && a.dropout_rate > 0) {
        if (!rng) throw std::invalid_argument("training forward pass needs an RNG for dropout");
        const double keep = 1.0 - a.dropout_rate;
        cache.dropout_mask.resize(a.hidden_units);
        cache.hidden_dropped.resize(a.hidden_units);
        for (int i = 0; i < a.hidden_units; ++i) {
            bool kept = rng->uniform() >= a.dropout_rate;
            cache.dropout_mask[i] = kept ? 1.0 : 0.0;
            cache.hidden_dropped[i] = kept ? cache.hidden[i] / keep : 0.0;
        }
    } else {
        cache.dropout_mask.clear();
        cache.hidden_dropped = cache.hidden;
    }

    std::vector<double> z2(a.num_classes);
    dense_forward(cache.hidden_dropped.data(), a.hidden_units, model.dense2_w.data(),
                  model.dense2_b.data(), a.num_classes, z2.data());
    softmax(z2.data(), a.num_classes, cache.probs.data());
}

std::array<double, 3> forward(const CnnModel& model, const ImageMatrix& image, bool training,
                              Rng* rng) {
    ForwardCache cache;
    forward_cache(model, image, training, rng, cache);
    if (cache.probs.size() != 3) throw std::logic_error("forward expects a 3-class model");
    return {cache.probs[0], cache.probs[1], cache.probs[2]};
}

Gradients Gradients::zeros(const CnnArch& a) {
    Gradients g;
    const int K = a.kernel;
    g.conv1_w.assign(static_cast<std::size_t>(a.conv1_filters) * K * K, 0.0);
    g.conv1_b.assign(a.conv1_filters, 0.0);
    g.conv2_w.assign(static_cast<std::size_t>(a.conv2_filters) * K * K * a.conv1_filters, 0.0);
    g.conv2_b.assign(a.conv2_filters, 0.0);
    g.dense1_w.assign(static_cast<std::size_t>(a.hidden_units) * a.flat_size(), 0.0);
    g.dense1_b.assign(a.hidden_units, 0.0);
    g.dense2_w.assign(static_cast<std::size_t>(a.num_classes) * a.hidden_units, 0.0);
    g.dense2_b.assign(a.num_classes, 0.0);
    return g;
}

namespace {

// Accumulates one sample's gradient contribution, already scaled by `weight`.
void backward_sample(const CnnModel& model, const ForwardCache& cache, Label label,
                     double weight, Gradients& g) {
    const CnnArch& a = model.arch;
    const int K = a.kernel;
    const int O1 = a.conv1_out(), O2 = a.conv2_out();
    const int C1 = a.conv1_filters, C2 = a.conv2_filters;
    const double keep = 1.0 - a.dropout_rate;
    const bool dropped = !cache.dropout_mask.empty();

    // Softmax + cross-entropy: dL/dz2 = p - onehot.
    std::vector<double> dz2(a.num_classes);
    for (int c = 0; c < a.num_classes; ++c) {
        dz2[c] = (cache.probs[c] - (c == static_cast<int>(label) ? 1.0 : 0.0)) * weight;
    }

    std::vector<double> dhidden(a.hidden_units, 0.0);
    for (int c = 0; c < a.num_classes; ++c) {
        double* gw = g.dense2_w.data() + static_cast<std::size_t>(c) * a.hidden_units;
        const double* w = model.dense2_w.data() + static_cast<std::size_t>(c) * a.hidden_units;
        for (int i = 0; i < a.hidden_units; ++i) {
            gw[i] += dz2[c] * cache.hidden_dropped[i];
            dhidden[i] += dz2[c] * w[i];
        }
        g.dense2_b[c] += dz2[c];
    }

    // Through dropout and the dense1 sigmoid.
    std::vector<double> dz1(a.hidden_units);
    for (int i = 0; i < a.hidden_units; ++i) {
        double grad = dropped ? dhidden[i] * cache.dropout_mask[i] / keep : dhidden[i];
        dz1[i] = grad * cache.hidden[i] * (1.0 - cache.hidden[i]);
    }

    std::vector<double> dflat(a.flat_size(), 0.0);
    for (int i = 0; i < a.hidden_units; ++i) {
        double* gw = g.dense1_w.data() + static_cast<std::size_t>(i) * a.flat_size();
        const double* w = model.dense1_w.data() + static_cast<std::size_t>(i) * a.flat_size();
        const double d = dz1[i];
        for (int j = 0; j < a.flat_size(); ++j) {
            gw[j] += d * cache.pool[j];
            dflat[j] += d * w[j];
        }
        g.dense1_b[i] += d;
    }

    // Unpool: gradient flows to the argmax element only.
    std::vector<double> da2(cache.a2.size(), 0.0);
    for (std::size_t j = 0; j < dflat.size(); ++j) da2[cache.pool_argmax[j]] += dflat[j];

    // conv2 sigmoid.
    std::vector<double> dz2c(cache.a2.size());
    for (std::size_t i = 0; i < da2.size(); ++i) {
        dz2c[i] = da2[i] * cache.a2[i] * (1.0 - cache.a2[i]);
    }

    std::vector<double> da1(cache.a1.size(), 0.0);
    for (int y = 0; y < O2; ++y) {
        for (int x = 0; x < O2; ++x) {
            for (int f = 0; f < C2; ++f) {
                const double d = dz2c[(y * O2 + x) * C2 + f];
                if (d == 0.0) continue;
                g.conv2_b[f] += d;
                double* gw = g.conv2_w.data() + static_cast<std::size_t>(f) * K * K * C1;
                const double* w = model.conv2_w.data() + static_cast<std::size_t>(f) * K * K * C1;
                for (int ky = 0; ky < K; ++ky) {
                    const double* in_row = cache.a1.data() + ((y + ky) * O1 + x) * C1;
                    double* da1_row = da1.data() + ((y + ky) * O1 + x) * C1;
                    for (int kx = 0; kx < K; ++kx) {
                        const double* pix = in_row + kx * C1;
                        double* dpix = da1_row + kx * C1;
                        double* gpix = gw + (ky * K + kx) * C1;
                        const double* wpix = w + (ky * K + kx) * C1;
                        for (int c = 0; c < C1; ++c) {
                            gpix[c] += d * pix[c];
                            dpix[c] += d * wpix[c];
                        }
                    }
                }
            }
        }
    }

    // conv1 sigmoid.
    for (int y = 0; y < O1; ++y) {
        for (int x = 0; x < O1; ++x) {
            for (int f = 0; f < C1; ++f) {
                const std::size_t idx = (y * O1 + x) * C1 + f;
                const double d = da1[idx] * cache.a1[idx] * (1.0 - cache.a1[idx]);
                if (d == 0.0) continue;
                g.conv1_b[f] += d;
                double* gw = g.conv1_w.data() + static_cast<std::size_t>(f) * K * K;
                for (int ky = 0; ky < K; ++ky) {
                    const double* in_row = cache.input.data() + (y + ky) * a.input_size + x;
                    for (int kx = 0; kx < K; ++kx) {
                        gw[ky * K + kx] += d * in_row[kx];
                    }
                }
            }
        }
    }
}

}  // namespace

Gradients backward(const CnnModel& model, std::span<const ImageMatrix> batch,
                   std::span<const Label> labels, Rng* dropout_rng, double* loss_out) {
    if (batch.size() != labels.size()) throw std::invalid_argument("batch/label size mismatch");
    if (batch.empty()) throw std::invalid_argument("empty batch");

    Gradients g = Gradients::zeros(model.arch);
    const double weight = 1.0 / static_cast<double>(batch.size());
    double loss = 0;
    ForwardCache cache;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        forward_cache(model, batch[s], dropout_rng != nullptr, dropout_rng, cache);
        double p = cache.probs[static_cast<int>(labels[s])];
        loss += -std::log(std::max(p, 1e-300)) * weight;
        backward_sample(model, cache, labels[s], weight, g);
    }
    if (loss_out) *loss_out = loss;
    return g;
}

double batch_loss(const CnnModel& model, std::span<const ImageMatrix> batch,
                  std::span<const Label> labels) {
    if (batch.size() != labels.size()) throw std::invalid_argument("batch/label size mismatch");
    double loss = 0;
    ForwardCache cache;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        forward_cache(model, batch[s], false, nullptr, cache);
        loss += -std::log(std::max(cache.probs[static_cast<int>(labels[s])], 1e-300));
    }
    return loss / static_cast<double>(batch.size());
}

void TrainConfig::validate() const {
    if (learning_rate < 0) throw std::invalid_argument("learning_rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (validation_fraction < 0 || validation_fraction >= 1) {
        throw std::invalid_argument("validation_fraction must be in [0, 1)");
    }
}

namespace {

struct AdamState {
    std::vector<double> m, v;
    long t = 0;
};

void apply_update(CnnModel& model, Gradients& grads, const TrainConfig& cfg, AdamState& adam) {
    auto params = param_views(model);
    auto gviews = param_views(grads, model.arch);
    if (cfg.optimizer == Optimizer::Sgd) {
        for (std::size_t b = 0; b < params.size(); ++b) {
            for (std::size_t i = 0; i < params[b].size; ++i) {
                params[b].data[i] -= cfg.learning_rate * gviews[b].data[i];
            }
        }
        return;
    }
    std::size_t total = 0;
    for (const auto& view : params) total += view.size;
    if (adam.m.empty()) {
        adam.m.assign(total, 0.0);
        adam.v.assign(total, 0.0);
    }
    adam.t++;
    const double bc1 = 1.0 - std::pow(cfg.beta1, adam.t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, adam.t);
    std::size_t offset = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size; ++i, ++offset) {
            double grad = gviews[b].data[i];
            adam.m[offset] = cfg.beta1 * adam.m[offset] + (1.0 - cfg.beta1) * grad;
            adam.v[offset] = cfg.beta2 * adam.v[offset] + (1.0 - cfg.beta2) * grad * grad;
            double mhat = adam.m[offset] / bc1;
            double vhat = adam.v[offset] / bc2;
            params[b].data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
        }
    }
}

double accuracy_of(const CnnModel& model, std::span<const ImageMatrix> images,
                   std::span<const Label> labels) {
    if (images.empty()) return 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (predict(model, images[i]) == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / images.size();
}

}  // namespace

TrainHistory train(CnnModel& model, const Dataset& trainset, const TrainConfig& config) {
    config.validate();
    if (trainset.items.empty()) throw std::invalid_argument("empty training dataset");

    std::vector<ImageMatrix> images;
    std::vector<Label> labels;
    images.reserve(trainset.items.size());
    for (const auto& item : trainset.items) {
        images.push_back(item.values);
        labels.push_back(item.label);
    }

    const std::size_t n = images.size();
    const std::size_t n_val = static_cast<std::size_t>(config.validation_fraction * n);
    const std::size_t n_fit = n - n_val;
    if (n_fit == 0) throw std::invalid_argument("validation fraction leaves no training data");

    std::span<const ImageMatrix> fit_images(images.data(), n_fit);
    std::span<const Label> fit_labels(labels.data(), n_fit);
    std::span<const ImageMatrix> val_images(images.data() + n_fit, n_val);
    std::span<const Label> val_labels(labels.data() + n_fit, n_val);

    std::array<double, 3> class_weight{1.0, 1.0, 1.0};
    if (config.class_weights) {
        std::array<double, 3> counts{0, 0, 0};
        for (std::size_t i = 0; i < n_fit; ++i) counts[static_cast<int>(fit_labels[i])] += 1;
        for (int c = 0; c < 3; ++c) {
            class_weight[c] = counts[c] > 0 ? n_fit / (3.0 * counts[c]) : 0.0;
        }
    }

    Rng rng(config.seed);
    AdamState adam;
    TrainHistory history;
    std::vector<std::size_t> order(n_fit);
    std::iota(order.begin(), order.end(), 0);

    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> best_params = snapshot(model);
    int best_epoch = 0;
    int stale = 0;

    std::vector<ImageMatrix> batch;
    std::vector<Label> batch_labels;
    ForwardCache cache;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        // Fisher-Yates shuffle from the run RNG.
        for (std::size_t i = n_fit - 1; i > 0; --i) {
            std::size_t j = rng.below(i + 1);
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n_fit; start += config.batch_size) {
            std::size_t end = std::min(n_fit, start + config.batch_size);
            batch.clear();
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(fit_images[order[i]]);
                batch_labels.push_back(fit_labels[order[i]]);
            }

            Gradients g = Gradients::zeros(model.arch);
            const double inv_n = 1.0 / static_cast<double>(batch.size());
            double batch_loss_value = 0;
            for (std::size_t s = 0; s < batch.size(); ++s) {
                forward_cache(model, batch[s], true, &rng, cache);
                double w = inv_n * class_weight[static_cast<int>(batch_labels[s])];
                double p = cache.probs[static_cast<int>(batch_labels[s])];
                batch_loss_value += -std::log(std::max(p, 1e-300)) * w;
                backward_sample(model, cache, batch_labels[s], w, g);
            }
            if (!std::isfinite(batch_loss_value)) {
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batches + 1));
            }
            apply_update(model, g, config, adam);
            epoch_loss += batch_loss_value;
            ++batches;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss / std::max<std::size_t>(batches, 1);
        stats.train_accuracy = accuracy_of(model, fit_images, fit_labels);
        if (n_val > 0) {
            stats.val_loss = batch_loss(model, val_images, val_labels);
            stats.val_accuracy = accuracy_of(model, val_images, val_labels);
        } else {
            stats.val_loss = batch_loss(model, fit_images, fit_labels);
            stats.val_accuracy = stats.train_accuracy;
        }
        history.epochs.push_back(stats);

        if (!std::isfinite(stats.val_loss)) {
            throw std::runtime_error("training diverged: non-finite validation loss at epoch " +
                                     std::to_string(epoch));
        }
        if (stats.val_loss < best_loss - 1e-12) {
            best_loss = stats.val_loss;
            best_params = snapshot(model);
            best_epoch = epoch;
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }

    restore(model, best_params);
    history.best_epoch = best_epoch;
    history.best_val_loss = best_loss;
    return history;
}

Label predict(const CnnModel& model, const ImageMatrix& image) {
    auto probs = forward(model, image, false, nullptr);
    int best = 0;
    for (int c = 1; c < 3; ++c) {
        if (probs[c] > probs[best]) best = c;
    }
    return static_cast<Label>(best);
}

namespace {
constexpr char kMagic[8] = {'C', 'N', 'T', 'M', 'O', 'D', 'L', '1'};
}

void save_model(const CnnModel& model, const std::filesystem::path& path,
                const TrainConfig* config) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());

    nlohmann::json header;
    header["arch"] = {{"input_size", model.arch.input_size},
                      {"kernel", model.arch.kernel},
                      {"conv1_filters", model.arch.conv1_filters},
                      {"conv2_filters", model.arch.conv2_filters},
                      {"hidden_units", model.arch.hidden_units},
                      {"num_classes", model.arch.num_classes},
                      {"dropout_rate", model.arch.dropout_rate}};
    if (config) {
        header["train_config"] = {
            {"learning_rate", config->learning_rate},
            {"batch_size", config->batch_size},
            {"max_epochs", config->max_epochs},
            {"optimizer", config->optimizer == Optimizer::Adam ? "adam" : "sgd"},
            {"seed", config->seed},
        };
    }
    std::string header_text = header.dump();

    out.write(kMagic, sizeof(kMagic));
    std::uint64_t header_len = header_text.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

    std::uint64_t count = model.param_count();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& view : param_views(const_cast<CnnModel&>(model))) {
        out.write(reinterpret_cast<const char*>(view.data),
                  static_cast<std::streamsize>(view.size * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

CnnModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw std::runtime_error(path.string() + ": not a model checkpoint");
    }
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw std::runtime_error(path.string() + ": truncated header");
    nlohmann::json header = nlohmann::json::parse(header_text);

    CnnArch arch;
    const auto& j = header.at("arch");
    arch.input_size = j.at("input_size").get<int>();
    arch.kernel = j.at("kernel").get<int>();
    arch.conv1_filters = j.at("conv1_filters").get<int>();
    arch.conv2_filters = j.at("conv2_filters").get<int>();
    arch.hidden_units = j.at("hidden_units").get<int>();
    arch.num_classes = j.at("num_classes").get<int>();
    arch.dropout_rate = j.at("dropout_rate").get<double>();

    CnnModel model = init_model(arch, 0);
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (count != model.param_count()) {
        throw std::runtime_error(path.string() + ": parameter count mismatch");
    }
    for (const auto& view : param_views(model)) {
        in.read(reinterpret_cast<char*>(view.data),
                static_cast<std::streamsize>(view.size * sizeof(double)));
    }
    if (!in) throw std::runtime_error(path.string() + ": truncated parameters");
    return model;
}

}  // namespace cnntrade
