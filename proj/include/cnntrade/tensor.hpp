#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cnntrade {

// Dense row-major tensor. Shape conventions in this project: images and
// activations are H x W x C (channel-last), filter banks are F x K x K x C.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    static Tensor zeros(std::vector<int> shape) {
        Tensor t;
        t.shape = std::move(shape);
        t.data.assign(t.numel(), 0.0);
        return t;
    }

    std::size_t numel() const {
        std::size_t n = 1;
        for (int s : shape) {
            if (s <= 0) throw std::invalid_argument("tensor dimensions must be positive");
            n *= static_cast<std::size_t>(s);
        }
        return n;
    }

    void check() const {
        if (data.size() != numel()) {
            throw std::invalid_argument("tensor data length does not match shape");
        }
        for (double x : data) {
            if (!std::isfinite(x)) throw std::invalid_argument("tensor contains non-finite value");
        }
    }
};

}  // namespace cnntrade
