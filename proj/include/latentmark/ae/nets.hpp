#pragma once

#include <functional>
#include <vector>

#include "latentmark/nn/modules.hpp"

namespace latentmark::ae {

// Decoder stage tap: receives (stage_index, stage input) and returns a
// same-shaped replacement. The watermark embedder hooks in here.
template <class T>
using GraphTap = std::function<nn::Var<T>(int, nn::Var<T>)>;

inline std::vector<int> encoder_channels(int n_down) {
    std::vector<int> ch = {16};
    const int steps[] = {24, 32, 48, 64, 80};
    for (int i = 0; i < n_down; ++i) ch.push_back(steps[std::min(i, 4)]);
    return ch;
}

// Stride-2 conv pyramid ending in a linear latent projection.
template <class T>
struct EncoderNet {
    nn::Conv2d<T> stem;
    std::vector<nn::Conv2d<T>> downs;
    nn::ResBlock<T> res;
    nn::Conv2d<T> head;
    int n_down = 0;

    EncoderNet() = default;
    EncoderNet(int f, int latent_channels, Rng& rng) {
        n_down = static_cast<int>(std::lround(std::log2(static_cast<double>(f))));
        const auto ch = encoder_channels(n_down);
        stem = nn::Conv2d<T>("enc.stem", 3, ch[0], 3, 1, rng);
        for (int i = 0; i < n_down; ++i)
            downs.emplace_back("enc.down" + std::to_string(i), ch[i], ch[i + 1], 3, 2, rng);
        res = nn::ResBlock<T>("enc.res", ch[n_down], rng);
        head = nn::Conv2d<T>("enc.head", ch[n_down], latent_channels, 3, 1, rng);
    }

    nn::Var<T> forward(nn::Graph<T>& g, nn::Binder<T>& bind, nn::Var<T> x, bool trainable) {
        auto h = nn::leaky_relu(g, stem(g, bind, x, trainable));
        for (auto& d : downs) h = nn::leaky_relu(g, d(g, bind, h, trainable));
        h = res(g, bind, h, trainable);
        return head(g, bind, h, trainable);
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> p;
        for (auto* q : stem.params()) p.push_back(q);
        for (auto& d : downs)
            for (auto* q : d.params()) p.push_back(q);
        for (auto* q : res.params()) p.push_back(q);
        for (auto* q : head.params()) p.push_back(q);
        return p;
    }
};

// Staged upsampling decoder. Stage i starts with a tap on its input latent,
// then (for upsampling stages) nearest-neighbor 2x followed by a conv.
template <class T>
struct DecoderNet {
    nn::Conv2d<T> stem;
    std::vector<nn::Conv2d<T>> stage_convs;
    nn::ResBlock<T> res;
    nn::Conv2d<T> head;
    std::vector<int> stage_channels;
    std::vector<int> upsample_schedule;  // 2 or 1 per stage

    DecoderNet() = default;
    DecoderNet(int f, std::vector<int> channels, int latent_channels, Rng& rng)
        : stage_channels(std::move(channels)) {
        const int n_up = static_cast<int>(std::lround(std::log2(static_cast<double>(f))));
        const int n = static_cast<int>(stage_channels.size());
        check(n >= n_up, "DecoderNet: need at least log2(f) stages");
        for (int i = 0; i < n; ++i) upsample_schedule.push_back(i < n_up ? 2 : 1);
        stem = nn::Conv2d<T>("dec.stem", latent_channels, stage_channels[0], 3, 1, rng);
        for (int i = 0; i < n; ++i) {
            const int cin = stage_channels[i];
            const int cout = (i + 1 < n) ? stage_channels[i + 1] : stage_channels[n - 1];
            stage_convs.emplace_back("dec.stage" + std::to_string(i), cin, cout, 3, 1, rng);
        }
        const int mid = stage_channels[std::min<size_t>(1, stage_channels.size() - 1)];
        res = nn::ResBlock<T>("dec.res", mid, rng);
        head = nn::Conv2d<T>("dec.head", stage_channels[n - 1], 3, 3, 1, rng);
    }

    int num_stages() const { return static_cast<int>(stage_convs.size()); }

    nn::Var<T> forward(nn::Graph<T>& g, nn::Binder<T>& bind, nn::Var<T> z, const GraphTap<T>& tap,
                       bool trainable) {
        check_shape(z->value.dim(1) == stem.w.value.dim(1),
                    "decode: latent has " + std::to_string(z->value.dim(1)) + " channels, decoder expects " +
                        std::to_string(stem.w.value.dim(1)));
        auto h = nn::leaky_relu(g, stem(g, bind, z, trainable));
        for (int i = 0; i < num_stages(); ++i) {
            if (tap) {
                const auto shape = h->value.shape();
                h = tap(i, h);
                check_shape(h->value.shape() == shape,
                            "decode_staged: tap at stage " + std::to_string(i) + " returned shape " +
                                nn::shape_str(h->value.shape()) + ", expected " + nn::shape_str(shape));
            }
            if (upsample_schedule[static_cast<size_t>(i)] == 2) h = nn::upsample_nearest2(g, h);
            h = nn::leaky_relu(g, stage_convs[static_cast<size_t>(i)](g, bind, h, trainable));
            if (i == 0) h = res(g, bind, h, trainable);
        }
        return nn::tanh_act(g, head(g, bind, h, trainable));
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> p;
        for (auto* q : stem.params()) p.push_back(q);
        for (auto& c : stage_convs)
            for (auto* q : c.params()) p.push_back(q);
        for (auto* q : res.params()) p.push_back(q);
        for (auto* q : head.params()) p.push_back(q);
        return p;
    }
};

}  // namespace latentmark::ae
