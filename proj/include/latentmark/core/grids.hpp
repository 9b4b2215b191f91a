#pragma once

#include "latentmark/nn/tensor.hpp"

namespace latentmark {

// Production scalar type. The nn engine stays templated so tests can run the
// identical code paths in double precision.
using real_t = float;

// C x h x w latent feature map at one decoder stage.
struct LatentGrid {
    nn::Tensor<real_t> values;  // (C, h, w)
    int stage_index = 0;

    LatentGrid() = default;
    LatentGrid(nn::Tensor<real_t> v, int stage) : values(std::move(v)), stage_index(stage) {
        check_shape(values.rank() == 3, "LatentGrid: expected rank-3 tensor, got " + nn::shape_str(values.shape()));
        check_shape(values.dim(0) >= 1 && values.dim(1) >= 1 && values.dim(2) >= 1,
                    "LatentGrid: dims must be >= 1");
        check(values.all_finite(), "LatentGrid: non-finite values");
    }

    int64_t channels() const { return values.dim(0); }
    int64_t height() const { return values.dim(1); }
    int64_t width() const { return values.dim(2); }
};

enum class ImageSource { generated, cover, attacked };

// RGB image in [-1, 1]. Values are clamped at module boundaries; interior
// computation may transiently exceed the range.
struct ImageGrid {
    nn::Tensor<real_t> values;  // (3, H, W)
    ImageSource source = ImageSource::generated;

    ImageGrid() = default;
    explicit ImageGrid(nn::Tensor<real_t> v, ImageSource src = ImageSource::generated)
        : values(std::move(v)), source(src) {
        check_shape(values.rank() == 3 && values.dim(0) == 3,
                    "ImageGrid: expected (3,H,W) tensor, got " + nn::shape_str(values.shape()));
        clamp_();
    }

    int64_t height() const { return values.dim(1); }
    int64_t width() const { return values.dim(2); }

    void clamp_() {
        for (int64_t i = 0; i < values.numel(); ++i)
            values[i] = std::clamp(values[i], real_t(-1), real_t(1));
    }
};

// batch helpers: (C,H,W) <-> (1,C,H,W)
inline nn::Tensor<real_t> to_batch(const nn::Tensor<real_t>& t) {
    return t.reshaped({1, t.dim(0), t.dim(1), t.dim(2)});
}

inline nn::Tensor<real_t> from_batch(const nn::Tensor<real_t>& t) {
    return t.reshaped({t.dim(1), t.dim(2), t.dim(3)});
}

}  // namespace latentmark
