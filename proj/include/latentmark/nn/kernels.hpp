#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "latentmark/nn/tensor.hpp"

// Raw numeric kernels shared by the forward ops and their adjoints.
// Convolutions go through im2col + GEMM; geometry kernels (resize, rotate)
// come in gather/scatter pairs so the backward pass reuses the same weights.
namespace latentmark::nn::kernels {

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

template <class T>
std::vector<T>& scratch(size_t which, size_t n) {
    thread_local std::vector<T> bufs[4];
    if (bufs[which].size() < n) bufs[which].resize(n);
    return bufs[which];
}

template <class T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, T* col) {
    const int64_t oh = conv_out_dim(H, kh, stride, pad);
    const int64_t ow = conv_out_dim(W, kw, stride, pad);
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
                T* dst = col + ((c * kh + ky) * kw + kx) * oh * ow;
                for (int64_t y = 0; y < oh; ++y) {
                    const int64_t sy = y * stride + ky - pad;
                    if (sy < 0 || sy >= H) {
                        std::fill(dst + y * ow, dst + (y + 1) * ow, T(0));
                        continue;
                    }
                    const T* src_row = x + (c * H + sy) * W;
                    for (int64_t xo = 0; xo < ow; ++xo) {
                        const int64_t sx = xo * stride + kx - pad;
                        dst[y * ow + xo] = (sx >= 0 && sx < W) ? src_row[sx] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im(const T* col, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, T* x) {
    const int64_t oh = conv_out_dim(H, kh, stride, pad);
    const int64_t ow = conv_out_dim(W, kw, stride, pad);
    std::fill(x, x + C * H * W, T(0));
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
                const T* src = col + ((c * kh + ky) * kw + kx) * oh * ow;
                for (int64_t y = 0; y < oh; ++y) {
                    const int64_t sy = y * stride + ky - pad;
                    if (sy < 0 || sy >= H) continue;
                    T* dst_row = x + (c * H + sy) * W;
                    for (int64_t xo = 0; xo < ow; ++xo) {
                        const int64_t sx = xo * stride + kx - pad;
                        if (sx >= 0 && sx < W) dst_row[sx] += src[y * ow + xo];
                    }
                }
            }
        }
    }
}

// y = w * im2col(x) + b, per sample.
template <class T>
Tensor<T> conv_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, int64_t stride,
                       int64_t pad) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int64_t oh = conv_out_dim(H, kh, stride, pad), ow = conv_out_dim(W, kw, stride, pad);
    const int64_t K = C * kh * kw, P = oh * ow;
    Tensor<T> y({N, Cout, oh, ow});
    auto& col = scratch<T>(0, static_cast<size_t>(K * P));
    ConstMatMap<T> wm(w.data(), Cout, K);
    for (int64_t n = 0; n < N; ++n) {
        im2col(x.data() + n * C * H * W, C, H, W, kh, kw, stride, pad, col.data());
        ConstMatMap<T> cm(col.data(), K, P);
        MatMap<T> ym(y.data() + n * Cout * P, Cout, P);
        ym.noalias() = wm * cm;
        if (b) {
            for (int64_t c = 0; c < Cout; ++c) ym.row(c).array() += (*b)[c];
        }
    }
    return y;
}

// gx = col2im(w^T * gy), per sample. Also the forward map of the transposed
// convolution used when building gradient-penalty graphs.
template <class T>
Tensor<T> conv_dinput(const Tensor<T>& gy, const Tensor<T>& w, int64_t stride, int64_t pad,
                      int64_t H, int64_t W) {
    const int64_t N = gy.dim(0), Cout = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    const int64_t C = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int64_t K = C * kh * kw, P = oh * ow;
    Tensor<T> gx({N, C, H, W});
    auto& col = scratch<T>(1, static_cast<size_t>(K * P));
    ConstMatMap<T> wm(w.data(), Cout, K);
    for (int64_t n = 0; n < N; ++n) {
        ConstMatMap<T> gym(gy.data() + n * Cout * P, Cout, P);
        MatMap<T> cm(col.data(), K, P);
        cm.noalias() = wm.transpose() * gym;
        col2im(col.data(), C, H, W, kh, kw, stride, pad, gx.data() + n * C * H * W);
    }
    return gx;
}

// gw = sum_n gy_n * im2col(x_n)^T; gb = row sums of gy.
template <class T>
void conv_dweight(const Tensor<T>& x, const Tensor<T>& gy, int64_t kh, int64_t kw, int64_t stride,
                  int64_t pad, Tensor<T>& gw, Tensor<T>* gb) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Cout = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    const int64_t K = C * kh * kw, P = oh * ow;
    auto& col = scratch<T>(2, static_cast<size_t>(K * P));
    MatMap<T> gwm(gw.data(), Cout, K);
    for (int64_t n = 0; n < N; ++n) {
        im2col(x.data() + n * C * H * W, C, H, W, kh, kw, stride, pad, col.data());
        ConstMatMap<T> cm(col.data(), K, P);
        ConstMatMap<T> gym(gy.data() + n * Cout * P, Cout, P);
        gwm.noalias() += gym * cm.transpose();
        if (gb) {
            for (int64_t c = 0; c < Cout; ++c) {
                T s = T(0);
                const T* row = gy.data() + (n * Cout + c) * P;
                for (int64_t p = 0; p < P; ++p) s += row[p];
                (*gb)[c] += s;
            }
        }
    }
}

struct BilinearCoeff {
    int64_t y0, y1, x0, x1;
    double wy, wx;
};

inline BilinearCoeff bilinear_coeff(int64_t oy, int64_t ox, int64_t ih, int64_t iw, int64_t oh,
                                    int64_t ow) {
    const double sy = static_cast<double>(ih) / static_cast<double>(oh);
    const double sx = static_cast<double>(iw) / static_cast<double>(ow);
    double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(ih - 1));
    fx = std::clamp(fx, 0.0, static_cast<double>(iw - 1));
    BilinearCoeff c;
    c.y0 = static_cast<int64_t>(fy);
    c.x0 = static_cast<int64_t>(fx);
    c.y1 = std::min(c.y0 + 1, ih - 1);
    c.x1 = std::min(c.x0 + 1, iw - 1);
    c.wy = fy - static_cast<double>(c.y0);
    c.wx = fx - static_cast<double>(c.x0);
    return c;
}

template <class T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int64_t oh, int64_t ow) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<T> y({N, C, oh, ow});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const T* src = x.data() + (n * C + c) * H * W;
            T* dst = y.data() + (n * C + c) * oh * ow;
            for (int64_t yy = 0; yy < oh; ++yy)
                for (int64_t xx = 0; xx < ow; ++xx) {
                    const auto cf = bilinear_coeff(yy, xx, H, W, oh, ow);
                    const double v00 = src[cf.y0 * W + cf.x0], v01 = src[cf.y0 * W + cf.x1];
                    const double v10 = src[cf.y1 * W + cf.x0], v11 = src[cf.y1 * W + cf.x1];
                    const double top = v00 + cf.wx * (v01 - v00);
                    const double bot = v10 + cf.wx * (v11 - v10);
                    dst[yy * ow + xx] = static_cast<T>(top + cf.wy * (bot - top));
                }
        }
    return y;
}

template <class T>
Tensor<T> resize_bilinear_adjoint(const Tensor<T>& gy, int64_t ih, int64_t iw) {
    const int64_t N = gy.dim(0), C = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    Tensor<T> gx({N, C, ih, iw});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const T* g = gy.data() + (n * C + c) * oh * ow;
            T* dst = gx.data() + (n * C + c) * ih * iw;
            for (int64_t yy = 0; yy < oh; ++yy)
                for (int64_t xx = 0; xx < ow; ++xx) {
                    const auto cf = bilinear_coeff(yy, xx, ih, iw, oh, ow);
                    const double gv = g[yy * ow + xx];
                    dst[cf.y0 * iw + cf.x0] += static_cast<T>((1 - cf.wy) * (1 - cf.wx) * gv);
                    dst[cf.y0 * iw + cf.x1] += static_cast<T>((1 - cf.wy) * cf.wx * gv);
                    dst[cf.y1 * iw + cf.x0] += static_cast<T>(cf.wy * (1 - cf.wx) * gv);
                    dst[cf.y1 * iw + cf.x1] += static_cast<T>(cf.wy * cf.wx * gv);
                }
        }
    return gx;
}

// Rotation around the image center, bilinear sampling, zero fill (mid-gray in
// the [-1,1] convention). forward=true gathers; forward=false scatters gy.
template <class T>
Tensor<T> rotate_bilinear(const Tensor<T>& x, double angle_deg, bool forward) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<T> out({N, C, H, W});
    const double a = angle_deg * 3.14159265358979323846 / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    const double cy = (static_cast<double>(H) - 1.0) / 2.0;
    const double cx = (static_cast<double>(W) - 1.0) / 2.0;
    for (int64_t yy = 0; yy < H; ++yy)
        for (int64_t xx = 0; xx < W; ++xx) {
            // inverse map: output pixel <- input location
            const double dy = static_cast<double>(yy) - cy;
            const double dx = static_cast<double>(xx) - cx;
            const double sy = ca * dy - sa * dx + cy;
            const double sx = sa * dy + ca * dx + cx;
            const int64_t y0 = static_cast<int64_t>(std::floor(sy));
            const int64_t x0 = static_cast<int64_t>(std::floor(sx));
            const double wy = sy - static_cast<double>(y0);
            const double wx = sx - static_cast<double>(x0);
            for (int64_t t = 0; t < 4; ++t) {
                const int64_t ys = y0 + (t >> 1), xs = x0 + (t & 1);
                if (ys < 0 || ys >= H || xs < 0 || xs >= W) continue;
                const double wgt = ((t >> 1) ? wy : 1 - wy) * ((t & 1) ? wx : 1 - wx);
                if (wgt == 0.0) continue;
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t c = 0; c < C; ++c) {
                        if (forward)
                            out.at4(n, c, yy, xx) += static_cast<T>(wgt * x.at4(n, c, ys, xs));
                        else
                            out.at4(n, c, ys, xs) += static_cast<T>(wgt * x.at4(n, c, yy, xx));
                    }
            }
        }
    return out;
}

inline std::vector<double> gaussian_kernel_1d(int64_t ksize) {
    // OpenCV's sigma-from-kernel-size rule
    const double sigma = 0.3 * ((static_cast<double>(ksize) - 1.0) * 0.5 - 1.0) + 0.8;
    std::vector<double> k(static_cast<size_t>(ksize));
    const int64_t r = ksize / 2;
    double sum = 0.0;
    for (int64_t i = 0; i < ksize; ++i) {
        const double d = static_cast<double>(i - r);
        k[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[static_cast<size_t>(i)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Separable Gaussian blur with replicate padding. adjoint=true applies the
// transpose (scatter with clamped indices), which is what the backward needs.
template <class T>
Tensor<T> gaussian_blur(const Tensor<T>& x, int64_t ksize, bool adjoint) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto k = gaussian_kernel_1d(ksize);
    const int64_t r = ksize / 2;
    Tensor<T> tmp({N, C, H, W});
    Tensor<T> out({N, C, H, W});
    // horizontal pass
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t y = 0; y < H; ++y) {
                const T* src = x.data() + ((n * C + c) * H + y) * W;
                T* dst = tmp.data() + ((n * C + c) * H + y) * W;
                for (int64_t xx = 0; xx < W; ++xx) {
                    if (!adjoint) {
                        double acc = 0.0;
                        for (int64_t t = -r; t <= r; ++t)
                            acc += k[static_cast<size_t>(t + r)] * src[std::clamp(xx + t, int64_t(0), W - 1)];
                        dst[xx] = static_cast<T>(acc);
                    } else {
                        const double g = src[xx];
                        for (int64_t t = -r; t <= r; ++t)
                            dst[std::clamp(xx + t, int64_t(0), W - 1)] += static_cast<T>(k[static_cast<size_t>(t + r)] * g);
                    }
                }
            }
    // vertical pass
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t xx = 0; xx < W; ++xx) {
                for (int64_t y = 0; y < H; ++y) {
                    if (!adjoint) {
                        double acc = 0.0;
                        for (int64_t t = -r; t <= r; ++t)
                            acc += k[static_cast<size_t>(t + r)] * tmp.at4(n, c, std::clamp(y + t, int64_t(0), H - 1), xx);
                        out.at4(n, c, y, xx) = static_cast<T>(acc);
                    } else {
                        const double g = tmp.at4(n, c, y, xx);
                        for (int64_t t = -r; t <= r; ++t)
                            out.at4(n, c, std::clamp(y + t, int64_t(0), H - 1), xx) += static_cast<T>(k[static_cast<size_t>(t + r)] * g);
                    }
                }
            }
    return out;
}

}  // namespace latentmark::nn::kernels
