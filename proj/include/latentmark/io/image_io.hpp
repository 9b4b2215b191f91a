#pragma once

#include <string>
#include <vector>

#include "latentmark/core/grids.hpp"

namespace latentmark::io {

// byte-level JPEG round trip (encode at `quality`, decode back)
std::vector<unsigned char> jpeg_roundtrip_rgb8(const std::vector<unsigned char>& rgb, int width,
                                               int height, int quality);

nn::Tensor<real_t> read_png(const std::string& path);            // (3,H,W) in [-1,1]
void write_png(const std::string& path, const nn::Tensor<real_t>& img);

// [-1,1] float <-> interleaved RGB8
std::vector<unsigned char> to_rgb8(const nn::Tensor<real_t>& img);
nn::Tensor<real_t> from_rgb8(const std::vector<unsigned char>& rgb, int width, int height);

// JPEG round trip on (3,H,W) or (N,3,H,W) tensors, any scalar type
template <class T>
nn::Tensor<T> jpeg_roundtrip(const nn::Tensor<T>& img, int quality) {
    const bool batched = img.rank() == 4;
    const int64_t N = batched ? img.dim(0) : 1;
    const int64_t H = batched ? img.dim(2) : img.dim(1);
    const int64_t W = batched ? img.dim(3) : img.dim(2);
    nn::Tensor<T> out(img.shape());
    const int64_t plane = 3 * H * W;
    std::vector<unsigned char> rgb(static_cast<size_t>(plane));
    for (int64_t n = 0; n < N; ++n) {
        const T* src = img.data() + n * plane;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                for (int64_t c = 0; c < 3; ++c) {
                    const double v = (static_cast<double>(src[(c * H + y) * W + x]) + 1.0) * 127.5;
                    rgb[static_cast<size_t>((y * W + x) * 3 + c)] =
                        static_cast<unsigned char>(std::clamp(v + 0.5, 0.0, 255.0));
                }
        const auto dec = jpeg_roundtrip_rgb8(rgb, static_cast<int>(W), static_cast<int>(H), quality);
        T* dst = out.data() + n * plane;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                for (int64_t c = 0; c < 3; ++c)
                    dst[(c * H + y) * W + x] =
                        static_cast<T>(static_cast<double>(dec[static_cast<size_t>((y * W + x) * 3 + c)]) / 127.5 - 1.0);
    }
    return out;
}

}  // namespace latentmark::io
