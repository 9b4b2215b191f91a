#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "latentmark/core/rng.hpp"
#include "latentmark/nn/ops.hpp"

namespace latentmark::nn {

template <class T>
void kaiming_init(Tensor<T>& w, int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in)) / std::sqrt(2.0);
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
}

template <class T>
struct Conv2d {
    Param<T> w, b;
    int64_t stride = 1, pad = 1;

    Conv2d() = default;
    Conv2d(const std::string& name, int64_t cin, int64_t cout, int64_t k, int64_t stride_, Rng& rng,
           bool zero_init = false)
        : stride(stride_), pad(k / 2) {
        w = Param<T>(name + ".w", Tensor<T>({cout, cin, k, k}));
        b = Param<T>(name + ".b", Tensor<T>({cout}));
        if (!zero_init) kaiming_init(w.value, cin * k * k, rng);
        w.reset_moments();
        b.reset_moments();
    }

    Var<T> operator()(Graph<T>& g, Binder<T>& bind, Var<T> x, bool trainable = true) {
        return conv2d(g, x, bind(w, trainable), bind(b, trainable), stride, pad);
    }

    std::vector<Param<T>*> params() { return {&w, &b}; }
};

template <class T>
struct Linear {
    Param<T> w, b;

    Linear() = default;
    Linear(const std::string& name, int64_t fin, int64_t fout, Rng& rng) {
        w = Param<T>(name + ".w", Tensor<T>({fout, fin}));
        b = Param<T>(name + ".b", Tensor<T>({fout}));
        kaiming_init(w.value, fin, rng);
        w.reset_moments();
        b.reset_moments();
    }

    Var<T> operator()(Graph<T>& g, Binder<T>& bind, Var<T> x, bool trainable = true) {
        return linear(g, x, bind(w, trainable), bind(b, trainable));
    }

    std::vector<Param<T>*> params() { return {&w, &b}; }
};

// h + conv2(lrelu(conv1(h))), shape preserving
template <class T>
struct ResBlock {
    Conv2d<T> c1, c2;

    ResBlock() = default;
    ResBlock(const std::string& name, int64_t ch, Rng& rng)
        : c1(name + ".c1", ch, ch, 3, 1, rng), c2(name + ".c2", ch, ch, 3, 1, rng) {}

    Var<T> operator()(Graph<T>& g, Binder<T>& bind, Var<T> x, bool trainable = true) {
        auto h = leaky_relu(g, c1(g, bind, x, trainable));
        return add(g, x, c2(g, bind, h, trainable));
    }

    std::vector<Param<T>*> params() {
        auto p = c1.params();
        for (auto* q : c2.params()) p.push_back(q);
        return p;
    }
};

}  // namespace latentmark::nn
