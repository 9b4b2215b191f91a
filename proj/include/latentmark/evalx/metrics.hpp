#pragma once

#include "latentmark/core/grids.hpp"

namespace latentmark::evalx {

inline constexpr double kPsnrCap = 100.0;  // sentinel for identical images

// 10*log10(255^2 / MSE) on the [0,255] rescaling of the [-1,1] range.
double psnr(const nn::Tensor<real_t>& a, const nn::Tensor<real_t>& b);

// Windowed SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01 / K2=0.03 on the
// [0,255] rescaling, averaged over channels; windows fully inside the image.
double ssim(const nn::Tensor<real_t>& a, const nn::Tensor<real_t>& b, int window = 11);

inline double psnr(const ImageGrid& a, const ImageGrid& b) { return psnr(a.values, b.values); }
inline double ssim(const ImageGrid& a, const ImageGrid& b) { return ssim(a.values, b.values); }

}  // namespace latentmark::evalx
