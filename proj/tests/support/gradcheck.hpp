#pragma once

// Finite-difference gradient oracle. The forward math here is an
// independent re-implementation (it never calls the production kernels), so
// agreement checks analytic backprop against a second derivation of the
// same loss. For large models the oracle recomputes only the perturbed
// parameter's cone of influence, which is exact, not an approximation: all
// untouched activations are identical at +h and -h and cancel in the
// central difference.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cnntrade/cnn.hpp"

namespace cnntrade::testing {

namespace gc {

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void conv_layer(const std::vector<double>& in, int H, int W, int C,
                       const std::vector<double>& w, const std::vector<double>& b, int F, int K,
                       std::vector<double>& out) {
    const int OH = H - K + 1, OW = W - K + 1;
    out.assign(static_cast<std::size_t>(OH) * OW * F, 0.0);
    for (int y = 0; y < OH; ++y)
        for (int x = 0; x < OW; ++x)
            for (int f = 0; f < F; ++f) {
                double acc = b[f];
                for (int ky = 0; ky < K; ++ky)
                    for (int kx = 0; kx < K; ++kx)
                        for (int c = 0; c < C; ++c)
                            acc += in[((y + ky) * W + (x + kx)) * C + c] *
                                   w[((static_cast<std::size_t>(f) * K + ky) * K + kx) * C + c];
                out[(y * OW + x) * F + f] = sig(acc);
            }
}

inline void pool_layer(const std::vector<double>& in, int H, int W, int F,
                       std::vector<double>& out) {
    const int OH = H / 2, OW = W / 2;
    out.assign(static_cast<std::size_t>(OH) * OW * F, 0.0);
    for (int y = 0; y < OH; ++y)
        for (int x = 0; x < OW; ++x)
            for (int f = 0; f < F; ++f) {
                double m = in[((2 * y) * W + 2 * x) * F + f];
                m = std::max(m, in[((2 * y) * W + 2 * x + 1) * F + f]);
                m = std::max(m, in[((2 * y + 1) * W + 2 * x) * F + f]);
                m = std::max(m, in[((2 * y + 1) * W + 2 * x + 1) * F + f]);
                out[(y * OW + x) * F + f] = m;
            }
}

inline void dense(const std::vector<double>& in, const std::vector<double>& w,
                  const std::vector<double>& b, int n_out, std::vector<double>& out) {
    const std::size_t n_in = in.size();
    out.assign(n_out, 0.0);
    for (int i = 0; i < n_out; ++i) {
        double acc = b[i];
        for (std::size_t j = 0; j < n_in; ++j) acc += w[i * n_in + j] * in[j];
        out[i] = acc;
    }
}

inline double ce_from_logits(const std::vector<double>& z, int label) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0;
    for (double v : z) sum += std::exp(v - mx);
    return -(z[label] - mx - std::log(sum));
}

struct SampleCache {
    std::vector<double> input, a1, a2, pool, z1, hidden;
    int label = 0;
};

inline SampleCache make_cache(const CnnModel& m, const ImageMatrix& image, Label label) {
    const CnnArch& a = m.arch;
    SampleCache s;
    s.input.assign(image.v.begin(), image.v.end());
    s.label = static_cast<int>(label);
    conv_layer(s.input, a.input_size, a.input_size, 1, m.conv1_w, m.conv1_b, a.conv1_filters,
               a.kernel, s.a1);
    conv_layer(s.a1, a.conv1_out(), a.conv1_out(), a.conv1_filters, m.conv2_w, m.conv2_b,
               a.conv2_filters, a.kernel, s.a2);
    pool_layer(s.a2, a.conv2_out(), a.conv2_out(), a.conv2_filters, s.pool);
    dense(s.pool, m.dense1_w, m.dense1_b, a.hidden_units, s.z1);
    s.hidden.resize(a.hidden_units);
    for (int i = 0; i < a.hidden_units; ++i) s.hidden[i] = sig(s.z1[i]);
    return s;
}

inline double loss_full(const CnnModel& m, const SampleCache& s) {
    const CnnArch& a = m.arch;
    std::vector<double> a1, a2, pool, z1, hidden(a.hidden_units), z2;
    conv_layer(s.input, a.input_size, a.input_size, 1, m.conv1_w, m.conv1_b, a.conv1_filters,
               a.kernel, a1);
    conv_layer(a1, a.conv1_out(), a.conv1_out(), a.conv1_filters, m.conv2_w, m.conv2_b,
               a.conv2_filters, a.kernel, a2);
    pool_layer(a2, a.conv2_out(), a.conv2_out(), a.conv2_filters, pool);
    dense(pool, m.dense1_w, m.dense1_b, a.hidden_units, z1);
    for (int i = 0; i < a.hidden_units; ++i) hidden[i] = sig(z1[i]);
    dense(hidden, m.dense2_w, m.dense2_b, a.num_classes, z2);
    return ce_from_logits(z2, s.label);
}

// Loss after re-deriving conv2 output channel `f` from the cached a1.
inline double loss_from_conv2(const CnnModel& m, const SampleCache& s, int f) {
    const CnnArch& a = m.arch;
    const int O1 = a.conv1_out(), O2 = a.conv2_out(), K = a.kernel, C1 = a.conv1_filters;
    std::vector<double> a2 = s.a2;
    for (int y = 0; y < O2; ++y)
        for (int x = 0; x < O2; ++x) {
            double acc = m.conv2_b[f];
            for (int ky = 0; ky < K; ++ky)
                for (int kx = 0; kx < K; ++kx)
                    for (int c = 0; c < C1; ++c)
                        acc += s.a1[((y + ky) * O1 + (x + kx)) * C1 + c] *
                               m.conv2_w[((static_cast<std::size_t>(f) * K + ky) * K + kx) * C1 +
                                         c];
            a2[(y * O2 + x) * a.conv2_filters + f] = sig(acc);
        }
    std::vector<double> pool, z1, hidden(a.hidden_units), z2;
    pool_layer(a2, O2, O2, a.conv2_filters, pool);
    dense(pool, m.dense1_w, m.dense1_b, a.hidden_units, z1);
    for (int i = 0; i < a.hidden_units; ++i) hidden[i] = sig(z1[i]);
    dense(hidden, m.dense2_w, m.dense2_b, a.num_classes, z2);
    return ce_from_logits(z2, s.label);
}

// Loss after re-deriving dense1 unit `i` from the cached pool vector.
inline double loss_from_dense1(const CnnModel& m, const SampleCache& s, int i) {
    const CnnArch& a = m.arch;
    double acc = m.dense1_b[i];
    const std::size_t flat = s.pool.size();
    for (std::size_t j = 0; j < flat; ++j) acc += m.dense1_w[i * flat + j] * s.pool[j];
    std::vector<double> hidden = s.hidden;
    hidden[i] = sig(acc);
    std::vector<double> z2;
    dense(hidden, m.dense2_w, m.dense2_b, a.num_classes, z2);
    return ce_from_logits(z2, s.label);
}

inline double loss_from_dense2(const CnnModel& m, const SampleCache& s) {
    std::vector<double> z2;
    dense(s.hidden, m.dense2_w, m.dense2_b, m.arch.num_classes, z2);
    return ce_from_logits(z2, s.label);
}

}  // namespace gc

inline Gradients fd_gradients(CnnModel& model, std::span<const ImageMatrix> batch,
                              std::span<const Label> labels, double h) {
    const CnnArch& a = model.arch;
    std::vector<gc::SampleCache> caches;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        caches.push_back(gc::make_cache(model, batch[s], labels[s]));
    }
    const double denom = 2.0 * h * static_cast<double>(batch.size());

    Gradients g = Gradients::zeros(a);
    auto gviews = param_views(g, a);
    auto pviews = param_views(model);

    for (std::size_t b = 0; b < pviews.size(); ++b) {
        const std::string name = pviews[b].name;
        for (std::size_t idx = 0; idx < pviews[b].size; ++idx) {
            double& theta = pviews[b].data[idx];
            auto eval = [&](const gc::SampleCache& s) {
                if (name == "conv1_w" || name == "conv1_b") return gc::loss_full(model, s);
                if (name == "conv2_w") {
                    int f = static_cast<int>(idx /
                                             (static_cast<std::size_t>(a.kernel) * a.kernel *
                                              a.conv1_filters));
                    return gc::loss_from_conv2(model, s, f);
                }
                if (name == "conv2_b") return gc::loss_from_conv2(model, s, static_cast<int>(idx));
                if (name == "dense1_w") {
                    int i = static_cast<int>(idx / static_cast<std::size_t>(a.flat_size()));
                    return gc::loss_from_dense1(model, s, i);
                }
                if (name == "dense1_b") {
                    return gc::loss_from_dense1(model, s, static_cast<int>(idx));
                }
                return gc::loss_from_dense2(model, s);
            };

            double orig = theta;
            theta = orig + h;
            double plus = 0;
            for (const auto& s : caches) plus += eval(s);
            theta = orig - h;
            double minus = 0;
            for (const auto& s : caches) minus += eval(s);
            theta = orig;
            gviews[b].data[idx] = (plus - minus) / denom;
        }
    }
    return g;
}

// Full-forward central differences for every parameter. Quadratic in model
// size; only for small architectures.
inline Gradients fd_gradients_naive(CnnModel& model, std::span<const ImageMatrix> batch,
                                    std::span<const Label> labels, double h) {
    std::vector<gc::SampleCache> caches;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        caches.push_back(gc::make_cache(model, batch[s], labels[s]));
    }
    const double denom = 2.0 * h * static_cast<double>(batch.size());
    Gradients g = Gradients::zeros(model.arch);
    auto gviews = param_views(g, model.arch);
    auto pviews = param_views(model);
    for (std::size_t b = 0; b < pviews.size(); ++b) {
        for (std::size_t idx = 0; idx < pviews[b].size; ++idx) {
            double& theta = pviews[b].data[idx];
            double orig = theta;
            theta = orig + h;
            double plus = 0;
            for (const auto& s : caches) plus += gc::loss_full(model, s);
            theta = orig - h;
            double minus = 0;
            for (const auto& s : caches) minus += gc::loss_full(model, s);
            theta = orig;
            gviews[b].data[idx] = (plus - minus) / denom;
        }
    }
    return g;
}

struct GradCheckResult {
    double max_rel_error = 0;
    std::string worst_param;
    std::size_t checked = 0;
};

// Relative error with a floor so that near-zero gradient pairs are compared
// absolutely against the floor.
inline GradCheckResult compare_gradients(Gradients& analytic, Gradients& numeric,
                                         const CnnArch& arch, double floor = 1e-6) {
    GradCheckResult result;
    auto av = param_views(analytic, arch);
    auto nv = param_views(numeric, arch);
    for (std::size_t b = 0; b < av.size(); ++b) {
        for (std::size_t i = 0; i < av[b].size; ++i) {
            double x = av[b].data[i], y = nv[b].data[i];
            double rel = std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor});
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_param = std::string(av[b].name) + "[" + std::to_string(i) + "]";
            }
            result.checked++;
        }
    }
    return result;
}

}  // namespace cnntrade::testing
