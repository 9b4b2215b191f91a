#pragma once

#include <string>
#include <vector>

#include "latentmark/core/bit_message.hpp"
#include "latentmark/core/grids.hpp"
#include "latentmark/nn/checkpoint.hpp"
#include "latentmark/nn/modules.hpp"

namespace latentmark::extractor {

// Residual-free conv classifier: inputs are bilinearly resized to the fixed
// training resolution R, then 8 convolutions, global mean pooling and a
// k-wide linear head.
template <class T>
struct ExtractorNet {
    std::vector<nn::Conv2d<T>> convs;
    nn::Linear<T> head;
    int R = 64;
    int k = 48;

    ExtractorNet() = default;
    ExtractorNet(int k_, int R_, Rng& rng) : R(R_), k(k_) {
        const int ch[] = {3, 24, 32, 40, 48, 56, 64, 80, 96};
        const int st[] = {1, 2, 1, 2, 1, 2, 1, 2};
        for (int i = 0; i < 8; ++i)
            convs.emplace_back("ext.c" + std::to_string(i), ch[i], ch[i + 1], 3, st[i], rng);
        head = nn::Linear<T>("ext.head", ch[8], k, rng);
    }

    nn::Var<T> forward(nn::Graph<T>& g, nn::Binder<T>& bind, nn::Var<T> x, bool trainable) {
        check_shape(x->value.dim(1) == 3, "extract: expected 3-channel input, got " +
                                              std::to_string(x->value.dim(1)));
        auto h = nn::resize_bilinear(g, x, R, R);
        for (auto& c : convs) h = nn::leaky_relu(g, c(g, bind, h, trainable));
        auto pooled = nn::global_mean_pool(g, h);  // translation-robust head
        return head(g, bind, pooled, trainable);
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> p;
        for (auto& c : convs)
            for (auto* q : c.params()) p.push_back(q);
        for (auto* q : head.params()) p.push_back(q);
        return p;
    }
};

class Extractor {
public:
    Extractor(int k, int R, uint64_t init_seed);

    int k() const { return net.k; }
    int input_resolution() const { return net.R; }

    std::vector<real_t> extract_logits(const ImageGrid& img) const;
    BitMessage extract_message(const ImageGrid& img) const;

    nn::Var<real_t> forward_batch(nn::Graph<real_t>& g, nn::Binder<real_t>& bind, nn::Var<real_t> x,
                                  bool trainable) const;

    void save(const std::string& path, const std::string& embedder_checksum) const;
    static Extractor load_file(const std::string& path);

    std::vector<nn::Param<real_t>*> params() const { return net.params(); }

    mutable ExtractorNet<real_t> net;

private:
    Extractor() = default;
};

}  // namespace latentmark::extractor
