#include "latentmark/evalx/metrics.hpp"

#include <cmath>
#include <vector>

#include "latentmark/core/check.hpp"

namespace latentmark::evalx {

namespace {

inline double to255(real_t v) { return (static_cast<double>(v) + 1.0) * 127.5; }

std::vector<double> gaussian_window(int n, double sigma) {
    std::vector<double> w(static_cast<size_t>(n));
    const int r = n / 2;
    double sum = 0;
    for (int i = 0; i < n; ++i) {
        const double d = i - r;
        w[static_cast<size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
        sum += w[static_cast<size_t>(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

}  // namespace

double psnr(const nn::Tensor<real_t>& a, const nn::Tensor<real_t>& b) {
    check_shape(a.same_shape(b), "psnr: shape mismatch");
    double mse = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double d = to255(a[i]) - to255(b[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse <= 0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double ssim(const nn::Tensor<real_t>& a, const nn::Tensor<real_t>& b, int window) {
    check_shape(a.same_shape(b), "ssim: shape mismatch");
    const int64_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
    check_shape(H >= window && W >= window,
                "ssim: image " + std::to_string(H) + "x" + std::to_string(W) + " smaller than window " +
                    std::to_string(window));
    const auto w1 = gaussian_window(window, 1.5);
    const int r = window / 2;
    const double c1 = (0.01 * 255) * (0.01 * 255);
    const double c2 = (0.03 * 255) * (0.03 * 255);

    double total = 0;
    for (int64_t c = 0; c < C; ++c) {
        // separable filtering of the five moment images over valid rows/cols
        const int64_t vw = W - 2 * r, vh = H - 2 * r;
        std::vector<double> ma(static_cast<size_t>(H * vw)), mb(ma.size()), maa(ma.size()), mbb(ma.size()),
            mab(ma.size());
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < vw; ++x) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int t = 0; t < window; ++t) {
                    const double va = to255(a.at3(c, y, x + t));
                    const double vb = to255(b.at3(c, y, x + t));
                    const double wt = w1[static_cast<size_t>(t)];
                    sa += wt * va;
                    sb += wt * vb;
                    saa += wt * va * va;
                    sbb += wt * vb * vb;
                    sab += wt * va * vb;
                }
                const size_t idx = static_cast<size_t>(y * vw + x);
                ma[idx] = sa;
                mb[idx] = sb;
                maa[idx] = saa;
                mbb[idx] = sbb;
                mab[idx] = sab;
            }
        double acc = 0;
        for (int64_t y = 0; y < vh; ++y)
            for (int64_t x = 0; x < vw; ++x) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int t = 0; t < window; ++t) {
                    const size_t idx = static_cast<size_t>((y + t) * vw + x);
                    const double wt = w1[static_cast<size_t>(t)];
                    sa += wt * ma[idx];
                    sb += wt * mb[idx];
                    saa += wt * maa[idx];
                    sbb += wt * mbb[idx];
                    sab += wt * mab[idx];
                }
                const double va = saa - sa * sa;
                const double vb = sbb - sb * sb;
                const double cov = sab - sa * sb;
                const double num = (2 * sa * sb + c1) * (2 * cov + c2);
                const double den = (sa * sa + sb * sb + c1) * (va + vb + c2);
                acc += num / den;
            }
        total += acc / static_cast<double>(vh * vw);
    }
    return total / static_cast<double>(C);
}

}  // namespace latentmark::evalx
