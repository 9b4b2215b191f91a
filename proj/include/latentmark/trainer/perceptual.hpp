#pragma once

#include <string>

#include "latentmark/core/grids.hpp"
#include "latentmark/nn/checkpoint.hpp"
#include "latentmark/nn/ops.hpp"

namespace latentmark::trainer {

// Feature-space distance over a fixed multi-scale conv pyramid. The weights
// are frozen (deterministic random by default, or loaded from a checkpoint),
// so the loss is a stable perceptual metric rather than a moving target.
template <class T>
struct PerceptualPyramid {
    static constexpr int kScales = 3;
    nn::Tensor<T> w1, b1, w2, b2;  // 3->12 and 12->16, shared across scales

    PerceptualPyramid() { init(0x9e3779b9ULL); }

    void init(uint64_t seed) {
        Rng rng(seed);
        w1 = nn::Tensor<T>({12, 3, 3, 3});
        b1 = nn::Tensor<T>({12});
        w2 = nn::Tensor<T>({16, 12, 3, 3});
        b2 = nn::Tensor<T>({16});
        const double s1 = std::sqrt(2.0 / (3 * 9)), s2 = std::sqrt(2.0 / (12 * 9));
        for (int64_t i = 0; i < w1.numel(); ++i) w1[i] = static_cast<T>(rng.normal(0, s1));
        for (int64_t i = 0; i < w2.numel(); ++i) w2[i] = static_cast<T>(rng.normal(0, s2));
    }

    void load(const std::string& path) {
        auto a = nn::TensorArchive::load(path);
        if (a.manifest.value("kind", "") != "perceptual")
            throw IoError(path + ": not a perceptual-weights checkpoint");
        w1 = a.get<T>("lpips.w1");
        b1 = a.get<T>("lpips.b1");
        w2 = a.get<T>("lpips.w2");
        b2 = a.get<T>("lpips.b2");
    }

    void save(const std::string& path) const {
        nn::TensorArchive a;
        a.manifest["format_version"] = 1;
        a.manifest["kind"] = "perceptual";
        a.add("lpips.w1", w1);
        a.add("lpips.b1", b1);
        a.add("lpips.w2", w2);
        a.add("lpips.b2", b2);
        a.save(path);
    }

    nn::Var<T> features(nn::Graph<T>& g, nn::Var<T> x) {
        auto h = nn::conv2d(g, x, g.constant(w1), g.constant(b1), 1, 1);
        h = nn::leaky_relu(g, h);
        return nn::conv2d(g, h, g.constant(w2), g.constant(b2), 1, 1);
    }

    // sum over scales of mean squared feature difference
    nn::Var<T> distance(nn::Graph<T>& g, nn::Var<T> a, nn::Var<T> b) {
        check_shape(a->value.same_shape(b->value), "perceptual_loss: shape mismatch");
        nn::Var<T> total;
        for (int s = 0; s < kScales; ++s) {
            auto d = nn::mse_loss(g, features(g, a), features(g, b));
            total = total ? nn::add(g, total, d) : d;
            if (s + 1 < kScales) {
                if (a->value.dim(2) < 2 || a->value.dim(3) < 2) break;
                a = nn::avg_pool2(g, a);
                b = nn::avg_pool2(g, b);
            }
        }
        return total;
    }
};

}  // namespace latentmark::trainer
