#pragma once

#include <string>
#include <vector>

#include "latentmark/ae/autoencoder.hpp"
#include "latentmark/core/bit_message.hpp"

namespace latentmark::embedder {

// Message bits enter the linear map as {-1,+1}.
template <class T>
nn::Tensor<T> messages_to_pm1(const std::vector<BitMessage>& msgs) {
    const int64_t n = static_cast<int64_t>(msgs.size());
    const int64_t k = msgs.empty() ? 0 : msgs[0].k();
    nn::Tensor<T> t({n, k});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < k; ++j) t.at2(i, j) = msgs[static_cast<size_t>(i)].bit(static_cast<int>(j)) ? T(1) : T(-1);
    return t;
}

// Plain-tensor tiling used by the public API and tests; the graph op version
// lives in nn::spatial_tile.
template <class T>
nn::Tensor<T> tile_block(const nn::Tensor<T>& block, int64_t target_h, int64_t target_w) {
    check(target_h >= 1 && target_w >= 1, "spatial_tile: target dims must be >= 1");
    const int64_t C = block.dim(0), B = block.dim(1);
    check_shape(block.dim(2) == B, "spatial_tile: block must be square");
    nn::Tensor<T> out({C, target_h, target_w});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < target_h; ++y)
            for (int64_t x = 0; x < target_w; ++x) out.at3(c, y, x) = block.at3(c, y % B, x % B);
    return out;
}

// One watermark embedding module: linear map k -> B*B*C_i, spatial tiling,
// then a zero-initialized fusion convolution producing the residual latent.
template <class T>
struct EmbedModuleNet {
    nn::Linear<T> map;
    nn::Conv2d<T> fuse;
    int stage_index = 0;
    int B = 8;
    int C = 0;
    int k = 0;

    EmbedModuleNet() = default;
    EmbedModuleNet(int stage, int k_, int B_, int C_, Rng& rng) : stage_index(stage), B(B_), C(C_), k(k_) {
        map = nn::Linear<T>("emb" + std::to_string(stage) + ".map", k, B * B * C, rng);
        fuse = nn::Conv2d<T>("emb" + std::to_string(stage) + ".fuse", C, C, 3, 1, rng, /*zero_init=*/true);
    }

    // msg_pm: (N,k) in {-1,+1} -> noise block (N,C,B,B)
    nn::Var<T> noise_block(nn::Graph<T>& g, nn::Binder<T>& bind, nn::Var<T> msg_pm, bool trainable) {
        check_shape(msg_pm->value.dim(1) == k, "noise_block: message length " +
                                                   std::to_string(msg_pm->value.dim(1)) + " != k=" +
                                                   std::to_string(k));
        auto flat = map(g, bind, msg_pm, trainable);
        return nn::reshape(g, flat, {msg_pm->value.dim(0), C, B, B});
    }

    // residual latent with the same shape as the stage input
    nn::Var<T> residual(nn::Graph<T>& g, nn::Binder<T>& bind, nn::Var<T> msg_pm, int64_t h, int64_t w,
                        bool trainable) {
        auto block = noise_block(g, bind, msg_pm, trainable);
        auto tiled = nn::spatial_tile(g, block, h, w);
        return fuse(g, bind, tiled, trainable);
    }

    std::vector<nn::Param<T>*> params() {
        auto p = map.params();
        for (auto* q : fuse.params()) p.push_back(q);
        return p;
    }
};

// The set of per-stage embedding modules bound to a frozen staged decoder;
// together they realize the watermarking decoder D_w.
class EmbedderStack {
public:
    EmbedderStack(const ae::Autoencoder& ae, int k, int B, uint64_t init_seed);

    int k() const { return k_; }
    int B() const { return B_; }
    int num_modules() const { return static_cast<int>(modules.size()); }
    const ae::Autoencoder& bound_autoencoder() const { return *ae_; }

    nn::Tensor<real_t> make_noise_block(int stage, const BitMessage& m) const;
    LatentGrid embed_residual(int stage, const LatentGrid& z_i, const BitMessage& m) const;

    // D_w(z, m): decode with tap i computing z_i + delta z_i
    ImageGrid decode_watermarked(const LatentGrid& z, const BitMessage& m) const;

    // post-generation path: clamp(x + D_w(E(x), m) - D(E(x)))
    ImageGrid watermark_cover_image(const ImageGrid& x, const BitMessage& m) const;

    // residual mask D_w(z) - D(z), before any clamping
    nn::Tensor<real_t> watermark_mask(const LatentGrid& z, const BitMessage& m) const;

    // trainer hook: builds the watermarked decode on an existing graph
    nn::Var<real_t> decode_watermarked_batch(nn::Graph<real_t>& g, nn::Binder<real_t>& bind,
                                             nn::Var<real_t> z, nn::Var<real_t> msg_pm,
                                             bool trainable) const;

    void save(const std::string& path) const;
    static EmbedderStack load_file(const std::string& path, const ae::Autoencoder& ae);
    std::string weights_checksum() const;

    std::vector<nn::Param<real_t>*> params() const;

    mutable std::vector<EmbedModuleNet<real_t>> modules;

private:
    EmbedderStack() = default;
    nn::TensorArchive to_archive() const;

    const ae::Autoencoder* ae_ = nullptr;
    int k_ = 0;
    int B_ = 8;
};

}  // namespace latentmark::embedder
