#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "latentmark/ae/autoencoder.hpp"
#include "latentmark/core/grids.hpp"
#include "latentmark/core/rng.hpp"
#include "latentmark/io/image_io.hpp"
#include "latentmark/nn/ops.hpp"

namespace latentmark::attacks {

enum class AttackKind {
    center_crop,
    random_crop,
    rotation,
    resize,
    brightness,
    contrast,
    gaussian_noise,
    blur,
    jpeg,
    identity,
    combined,
    reencode,
};

// the 10 kinds sampled during training (combined/reencode are eval-only)
inline constexpr AttackKind kTrainingKinds[] = {
    AttackKind::center_crop, AttackKind::random_crop, AttackKind::rotation,  AttackKind::resize,
    AttackKind::brightness,  AttackKind::contrast,    AttackKind::gaussian_noise, AttackKind::blur,
    AttackKind::jpeg,        AttackKind::identity,
};

std::string kind_name(AttackKind k);
AttackKind kind_from_name(const std::string& name);

struct AttackSpec {
    AttackKind kind = AttackKind::identity;
    double parameter = 0.0;
    uint64_t seed = 0;  // used by the stochastic kinds (random_crop, gaussian_noise)
};

// throws ValidationError naming the kind and legal bounds
void validate_attack(const AttackSpec& spec);

struct CropRect {
    int64_t y0, x0, h, w;
};
CropRect crop_rect(const AttackSpec& spec, int64_t H, int64_t W);

struct AttackSampler {
    struct Range {
        double lo, hi;
    };
    Range crop_area{0.08, 0.95};
    Range rotation_deg{2.0, 46.0};
    Range resize_area{0.5, 1.5};
    Range brightness{0.0, 3.0};
    Range noise_sigma{0.0, 0.05};
    Range blur_kernel{3, 19};  // odd kernels
    Range contrast{0.0, 3.0};
    Range jpeg_quality{40, 100};
    bool active = false;  // gated by the training schedule
};

AttackSpec sample_attack(const AttackSampler& sampler, Rng& rng);

ImageGrid apply_attack(const AttackSpec& spec, const ImageGrid& img);
ImageGrid combined_attack(const ImageGrid& img);
ImageGrid reencode_attack(const ae::Autoencoder& autoenc, const ImageGrid& img);

struct NamedAttack {
    std::string name;
    AttackSpec spec;
};

// preset file: name<TAB>kind<TAB>parameter, '#' comments
std::vector<NamedAttack> parse_attack_presets(const std::string& path);
std::vector<NamedAttack> default_attack_presets();
void write_attack_presets(const std::string& path, const std::vector<NamedAttack>& presets);

// ----- graph builders (differentiable path used in training) -----

// y = c*x + (1-c)*mean_luma(x), per sample
template <class T>
nn::Var<T> contrast_adjust(nn::Graph<T>& g, nn::Var<T> x, double c) {
    static constexpr double kLuma[3] = {0.299, 0.587, 0.114};
    const int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    check_shape(C == 3, "contrast: expected 3 channels");
    const double inv = 1.0 / static_cast<double>(H * W);
    std::vector<double> mu(static_cast<size_t>(N), 0.0);
    for (int64_t n = 0; n < N; ++n) {
        double s = 0;
        for (int64_t ch = 0; ch < 3; ++ch) {
            const T* p = x->value.data() + (n * 3 + ch) * H * W;
            double cs = 0;
            for (int64_t i = 0; i < H * W; ++i) cs += p[i];
            s += kLuma[ch] * cs;
        }
        mu[static_cast<size_t>(n)] = s * inv;
    }
    nn::Tensor<T> y(x->value.shape());
    for (int64_t n = 0; n < N; ++n) {
        const double off = (1.0 - c) * mu[static_cast<size_t>(n)];
        const T* p = x->value.data() + n * 3 * H * W;
        T* q = y.data() + n * 3 * H * W;
        for (int64_t i = 0; i < 3 * H * W; ++i) q[i] = static_cast<T>(c * p[i] + off);
    }
    return g.make(std::move(y), {x}, [x, c, N, H, W, inv](nn::Node<T>& nd) {
        auto& gx = x->ensure_grad();
        for (int64_t n = 0; n < N; ++n) {
            double gsum[3] = {};
            for (int64_t ch = 0; ch < 3; ++ch) {
                const T* gp = nd.grad.data() + (n * 3 + ch) * H * W;
                for (int64_t i = 0; i < H * W; ++i) gsum[ch] += gp[i];
            }
            const double gtot = gsum[0] + gsum[1] + gsum[2];
            for (int64_t ch = 0; ch < 3; ++ch) {
                const T* gp = nd.grad.data() + (n * 3 + ch) * H * W;
                T* q = gx.data() + (n * 3 + ch) * H * W;
                const T extra = static_cast<T>((1.0 - c) * kLuma[ch] * inv * gtot);
                for (int64_t i = 0; i < H * W; ++i) q[i] += static_cast<T>(c) * gp[i] + extra;
            }
        }
    });
}

template <class T>
nn::Var<T> apply_attack_var(nn::Graph<T>& g, const AttackSpec& spec, nn::Var<T> img) {
    validate_attack(spec);
    const int64_t H = img->value.dim(2), W = img->value.dim(3);
    switch (spec.kind) {
        case AttackKind::identity:
            return img;
        case AttackKind::center_crop:
        case AttackKind::random_crop: {
            const auto r = crop_rect(spec, H, W);
            auto cropped = nn::slice_spatial(g, img, r.y0, r.x0, r.h, r.w);
            // retained region is resized back to the original resolution
            return nn::resize_bilinear(g, cropped, H, W);
        }
        case AttackKind::rotation:
            return nn::rotate(g, img, spec.parameter);
        case AttackKind::resize: {
            const double side = std::sqrt(spec.parameter);
            const int64_t oh = std::max<int64_t>(1, std::llround(side * static_cast<double>(H)));
            const int64_t ow = std::max<int64_t>(1, std::llround(side * static_cast<double>(W)));
            return nn::resize_bilinear(g, img, oh, ow);
        }
        case AttackKind::brightness: {
            const T b = static_cast<T>(spec.parameter);
            auto y = nn::add_scalar(g, nn::scale(g, img, b), static_cast<T>(spec.parameter - 1.0));
            return nn::clamp(g, y, T(-1), T(1));
        }
        case AttackKind::contrast:
            return nn::clamp(g, contrast_adjust(g, img, spec.parameter), T(-1), T(1));
        case AttackKind::gaussian_noise: {
            // sigma is specified on a unit dynamic range; [-1,1] spans two units
            const double sigma = 2.0 * spec.parameter;
            Rng nrng(spec.seed ^ 0x6e015eULL);
            nn::Tensor<T> noise(img->value.shape());
            for (int64_t i = 0; i < noise.numel(); ++i) noise[i] = static_cast<T>(sigma * nrng.normal());
            auto y = nn::add(g, img, g.constant(std::move(noise)));
            return nn::clamp(g, y, T(-1), T(1));
        }
        case AttackKind::blur:
            return nn::gaussian_blur(g, img, static_cast<int64_t>(std::llround(spec.parameter)));
        case AttackKind::jpeg: {
            const int q = static_cast<int>(std::llround(spec.parameter));
            return nn::straight_through<T>(g, img, [q](const nn::Tensor<T>& t) { return io::jpeg_roundtrip(t, q); });
        }
        case AttackKind::combined: {
            AttackSpec crop{AttackKind::center_crop, 0.40, spec.seed};
            AttackSpec bright{AttackKind::brightness, 2.0, spec.seed};
            AttackSpec jp{AttackKind::jpeg, 80, spec.seed};
            return apply_attack_var(g, jp, apply_attack_var(g, bright, apply_attack_var(g, crop, img)));
        }
        case AttackKind::reencode:
            throw ValidationError("reencode attack needs an autoencoder; use reencode_attack()");
    }
    throw ValidationError("unknown attack kind");
}

}  // namespace latentmark::attacks
