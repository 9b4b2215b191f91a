#include <doctest.h>

#include "latentmark/core/rng.hpp"
#include "latentmark/evalx/metrics.hpp"

using namespace latentmark;
using namespace latentmark::evalx;

namespace {

ImageGrid random_image(int S, uint64_t seed) {
    Rng rng(seed);
    nn::Tensor<real_t> t({3, S, S});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<real_t>(rng.uniform(-0.95, 0.95));
    return ImageGrid(std::move(t), ImageSource::generated);
}

// direct non-separable windowed-loop reference
double ssim_reference(const nn::Tensor<real_t>& a, const nn::Tensor<real_t>& b) {
    const int w = 11, r = 5;
    const double sigma = 1.5;
    double win[11][11];
    double wsum = 0;
    for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
            win[i][j] = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * sigma * sigma));
            wsum += win[i][j];
        }
    for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) win[i][j] /= wsum;
    const double c1 = 6.5025, c2 = 58.5225;  // (0.01*255)^2, (0.03*255)^2
    const int64_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
    double total = 0;
    for (int64_t c = 0; c < C; ++c) {
        double acc = 0;
        int64_t cnt = 0;
        for (int64_t y = 0; y + w <= H; ++y)
            for (int64_t x = 0; x + w <= W; ++x) {
                double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
                for (int i = 0; i < w; ++i)
                    for (int j = 0; j < w; ++j) {
                        const double pa = (a.at3(c, y + i, x + j) + 1.0) * 127.5;
                        const double pb = (b.at3(c, y + i, x + j) + 1.0) * 127.5;
                        ma += win[i][j] * pa;
                        mb += win[i][j] * pb;
                        va += win[i][j] * pa * pa;
                        vb += win[i][j] * pb * pb;
                        cov += win[i][j] * pa * pb;
                    }
                va -= ma * ma;
                vb -= mb * mb;
                cov -= ma * mb;
                acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++cnt;
            }
        total += acc / static_cast<double>(cnt);
    }
    return total / static_cast<double>(C);
}

}  // namespace

TEST_CASE("psnr: cap, analytic one-step difference, and loop oracle") {
    ImageGrid a = random_image(24, 1);
    CHECK(psnr(a, a) == kPsnrCap);

    // uniform +-1/255 on the unit range is one step of the 0..255 scale
    nn::Tensor<real_t> shifted = a.values;
    Rng rng(2);
    for (int64_t i = 0; i < shifted.numel(); ++i)
        shifted[i] += static_cast<real_t>((rng.bernoulli(0.5) ? 1.0 : -1.0) * (2.0 / 255.0));
    const double p = psnr(ImageGrid(shifted, ImageSource::generated), a);
    CHECK(p == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-4));
    CHECK(20.0 * std::log10(255.0) == doctest::Approx(48.1308).epsilon(1e-4));

    ImageGrid b = random_image(24, 3);
    double mse = 0;
    for (int64_t i = 0; i < a.values.numel(); ++i) {
        const double d = (static_cast<double>(a.values[i]) - b.values[i]) * 127.5;
        mse += d * d;
    }
    mse /= static_cast<double>(a.values.numel());
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(255.0 * 255.0 / mse)).epsilon(1e-3));

    CHECK_THROWS_AS(psnr(a, random_image(16, 4)), ShapeError);
}

TEST_CASE("ssim: identity, negation, reference agreement, window guard") {
    ImageGrid a = random_image(32, 5);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

    nn::Tensor<real_t> neg = a.values;
    for (int64_t i = 0; i < neg.numel(); ++i) neg[i] = -neg[i];
    CHECK(ssim(ImageGrid(neg, ImageSource::generated), a) < 0.0);

    ImageGrid b = random_image(32, 6);
    CHECK(ssim(a, b) == doctest::Approx(ssim_reference(a.values, b.values)).epsilon(1e-4));

    // a structured pair as well (blur-like correlation)
    nn::Tensor<real_t> smooth = a.values;
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < 32; ++y)
            for (int64_t x = 1; x < 32; ++x)
                smooth.at3(c, y, x) = 0.5f * (smooth.at3(c, y, x) + smooth.at3(c, y, x - 1));
    ImageGrid sm(smooth, ImageSource::generated);
    CHECK(ssim(sm, a) == doctest::Approx(ssim_reference(sm.values, a.values)).epsilon(1e-4));

    ImageGrid tiny = random_image(8, 7);
    CHECK_THROWS_AS(ssim(tiny, tiny), ShapeError);
}
