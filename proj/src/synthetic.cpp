#include <cmath>

#include "latentmark/core/check.hpp"
#include "latentmark/core/rng.hpp"
#include "latentmark/data/corpus.hpp"

namespace latentmark::data {

SyntheticCorpus::SyntheticCorpus(int64_t count, int image_size, uint64_t seed)
    : count_(count), size_(image_size), seed_(seed) {
    check(count >= 1, "SyntheticCorpus: count must be >= 1");
    check(image_size >= 8, "SyntheticCorpus: image_size must be >= 8");
}

nn::Tensor<real_t> SyntheticCorpus::get(int64_t index) const {
    check(index >= 0 && index < count_, "SyntheticCorpus: index out of range");
    Rng rng(seed_ * 0x1000193ULL + static_cast<uint64_t>(index) + 1);
    const int S = size_;
    nn::Tensor<real_t> img({3, S, S});

    // smooth background: linear gradient plus radial falloff, per channel
    double gx[3], gy[3], base[3], rad[3];
    const double cx = rng.uniform(0.2, 0.8) * S, cy = rng.uniform(0.2, 0.8) * S;
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(-0.45, 0.45);
        gx[c] = rng.uniform(-0.5, 0.5) / S;
        gy[c] = rng.uniform(-0.5, 0.5) / S;
        rad[c] = rng.uniform(-0.35, 0.35);
    }
    const double rscale = 1.0 / (0.5 * S);
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const double dx = (x - cx) * rscale, dy = (y - cy) * rscale;
            const double r = std::sqrt(dx * dx + dy * dy);
            for (int c = 0; c < 3; ++c)
                img.at3(c, y, x) = static_cast<real_t>(base[c] + gx[c] * x + gy[c] * y + rad[c] * std::exp(-r * r));
        }

    // sinusoid textures (shared geometry across channels, varied amplitude)
    const int ntex = static_cast<int>(rng.uniform_int(1, 3));
    for (int t = 0; t < ntex; ++t) {
        const double fy = rng.uniform(0.05, 0.45), fx = rng.uniform(0.05, 0.45);
        const double ph = rng.uniform(0.0, 6.28318);
        double amp[3];
        for (int c = 0; c < 3; ++c) amp[c] = rng.uniform(-0.18, 0.18);
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x) {
                const double v = std::sin(fy * y + fx * x + ph);
                for (int c = 0; c < 3; ++c) img.at3(c, y, x) += static_cast<real_t>(amp[c] * v);
            }
    }

    // soft-edged shapes
    const int nshapes = static_cast<int>(rng.uniform_int(2, 5));
    for (int sI = 0; sI < nshapes; ++sI) {
        const int kind = static_cast<int>(rng.uniform_int(0, 2));
        double col[3];
        for (int c = 0; c < 3; ++c) col[c] = rng.uniform(-0.8, 0.8);
        const double alpha = rng.uniform(0.35, 0.95);
        if (kind == 0) {  // disc
            const double scx = rng.uniform(0.1, 0.9) * S, scy = rng.uniform(0.1, 0.9) * S;
            const double rr = rng.uniform(0.08, 0.3) * S;
            const double soft = rng.uniform(1.0, 4.0);
            for (int y = 0; y < S; ++y)
                for (int x = 0; x < S; ++x) {
                    const double d = std::sqrt((x - scx) * (x - scx) + (y - scy) * (y - scy));
                    const double m = alpha / (1.0 + std::exp((d - rr) / soft));
                    for (int c = 0; c < 3; ++c)
                        img.at3(c, y, x) = static_cast<real_t>((1 - m) * img.at3(c, y, x) + m * col[c]);
                }
        } else if (kind == 1) {  // axis-aligned rectangle
            const int x0 = static_cast<int>(rng.uniform_int(0, S - 8));
            const int y0 = static_cast<int>(rng.uniform_int(0, S - 8));
            const int w = static_cast<int>(rng.uniform_int(6, std::max<int64_t>(7, S / 2)));
            const int h = static_cast<int>(rng.uniform_int(6, std::max<int64_t>(7, S / 2)));
            for (int y = y0; y < std::min(S, y0 + h); ++y)
                for (int x = x0; x < std::min(S, x0 + w); ++x)
                    for (int c = 0; c < 3; ++c)
                        img.at3(c, y, x) = static_cast<real_t>((1 - alpha) * img.at3(c, y, x) + alpha * col[c]);
        } else {  // diagonal stripe
            const double nx = rng.uniform(-1.0, 1.0), ny = rng.uniform(-1.0, 1.0);
            const double nn = std::max(1e-6, std::sqrt(nx * nx + ny * ny));
            const double off = rng.uniform(0.0, static_cast<double>(S));
            const double halfw = rng.uniform(2.0, 8.0);
            for (int y = 0; y < S; ++y)
                for (int x = 0; x < S; ++x) {
                    const double d = std::abs((nx * x + ny * y) / nn - off);
                    if (d < halfw)
                        for (int c = 0; c < 3; ++c)
                            img.at3(c, y, x) = static_cast<real_t>((1 - alpha) * img.at3(c, y, x) + alpha * col[c]);
                }
        }
    }

    for (int64_t i = 0; i < img.numel(); ++i)
        img[i] = std::clamp(img[i], real_t(-0.97), real_t(0.97));
    return img;
}

}  // namespace latentmark::data
