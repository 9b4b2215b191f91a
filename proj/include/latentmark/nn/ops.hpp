#pragma once

#include <cmath>
#include <functional>

#include "latentmark/nn/graph.hpp"
#include "latentmark/nn/kernels.hpp"

namespace latentmark::nn {

template <class T>
Var<T> detach(Graph<T>& g, const Var<T>& x) {
    return g.constant(x->value);
}

template <class T>
Var<T> add(Graph<T>& g, Var<T> a, Var<T> b) {
    check_shape(a->value.same_shape(b->value), "add: shape mismatch");
    Tensor<T> y = a->value;
    y.add_(b->value);
    return g.make(std::move(y), {a, b}, [a, b](Node<T>& n) {
        if (a->requires_grad) a->ensure_grad().add_(n.grad);
        if (b->requires_grad) b->ensure_grad().add_(n.grad);
    });
}

template <class T>
Var<T> sub(Graph<T>& g, Var<T> a, Var<T> b) {
    check_shape(a->value.same_shape(b->value), "sub: shape mismatch");
    Tensor<T> y = a->value;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] -= b->value[i];
    return g.make(std::move(y), {a, b}, [a, b](Node<T>& n) {
        if (a->requires_grad) a->ensure_grad().add_(n.grad);
        if (b->requires_grad) {
            auto& gb = b->ensure_grad();
            for (int64_t i = 0; i < gb.numel(); ++i) gb[i] -= n.grad[i];
        }
    });
}

template <class T>
Var<T> mul(Graph<T>& g, Var<T> a, Var<T> b) {
    check_shape(a->value.same_shape(b->value), "mul: shape mismatch");
    Tensor<T> y = a->value;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] *= b->value[i];
    return g.make(std::move(y), {a, b}, [a, b](Node<T>& n) {
        if (a->requires_grad) {
            auto& ga = a->ensure_grad();
            for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[i] * b->value[i];
        }
        if (b->requires_grad) {
            auto& gb = b->ensure_grad();
            for (int64_t i = 0; i < gb.numel(); ++i) gb[i] += n.grad[i] * a->value[i];
        }
    });
}

template <class T>
Var<T> scale(Graph<T>& g, Var<T> a, T s) {
    Tensor<T> y = a->value;
    y.scale_(s);
    return g.make(std::move(y), {a}, [a, s](Node<T>& n) {
        auto& ga = a->ensure_grad();
        for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[i] * s;
    });
}

template <class T>
Var<T> add_scalar(Graph<T>& g, Var<T> a, T s) {
    Tensor<T> y = a->value;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] += s;
    return g.make(std::move(y), {a}, [a](Node<T>& n) { a->ensure_grad().add_(n.grad); });
}

// elementwise multiply by a fixed tensor (masks, fixed weights)
template <class T>
Var<T> mul_const(Graph<T>& g, Var<T> a, Tensor<T> mask) {
    check_shape(a->value.same_shape(mask), "mul_const: shape mismatch");
    Tensor<T> y = a->value;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] *= mask[i];
    return g.make(std::move(y), {a}, [a, m = std::move(mask)](Node<T>& n) {
        auto& ga = a->ensure_grad();
        for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[i] * m[i];
    });
}

template <class T>
Var<T> leaky_relu(Graph<T>& g, Var<T> a, T slope = T(0.2)) {
    Tensor<T> y = a->value;
    for (int64_t i = 0; i < y.numel(); ++i)
        if (y[i] < T(0)) y[i] *= slope;
    return g.make(std::move(y), {a}, [a, slope](Node<T>& n) {
        auto& ga = a->ensure_grad();
        for (int64_t i = 0; i < ga.numel(); ++i)
            ga[i] += n.grad[i] * (a->value[i] >= T(0) ? T(1) : slope);
    });
}

template <class T>
Var<T> tanh_act(Graph<T>& g, Var<T> a) {
    Tensor<T> y = a->value;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::tanh(y[i]);
    return g.make(std::move(y), {a}, [a](Node<T>& n) {
        auto& ga = a->ensure_grad();
        for (int64_t i = 0; i < ga.numel(); ++i) {
            const T t = n.value[i];
            ga[i] += n.grad[i] * (T(1) - t * t);
        }
    });
}

// clamp with pass-through gradient strictly inside the range
template <class T>
Var<T> clamp(Graph<T>& g, Var<T> a, T lo, T hi) {
    Tensor<T> y = a->value;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::clamp(y[i], lo, hi);
    return g.make(std::move(y), {a}, [a, lo, hi](Node<T>& n) {
        auto& ga = a->ensure_grad();
        for (int64_t i = 0; i < ga.numel(); ++i) {
            const T v = a->value[i];
            if (v > lo && v < hi) ga[i] += n.grad[i];
        }
    });
}

template <class T>
Var<T> reshape(Graph<T>& g, Var<T> a, Shape s) {
    Tensor<T> y = a->value.reshaped(s);
    return g.make(std::move(y), {a}, [a](Node<T>& n) {
        auto& ga = a->ensure_grad();
        for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[i];
    });
}

template <class T>
Var<T> conv2d(Graph<T>& g, Var<T> x, Var<T> w, Var<T> b, int64_t stride = 1, int64_t pad = 1) {
    check_shape(x->value.dim(1) == w->value.dim(1),
                "conv2d: input channels " + std::to_string(x->value.dim(1)) + " != kernel channels " +
                    std::to_string(w->value.dim(1)));
    Tensor<T> y = kernels::conv_forward(x->value, w->value, b ? &b->value : nullptr, stride, pad);
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return g.make(std::move(y), std::move(parents), [x, w, b, stride, pad](Node<T>& n) {
        const int64_t kh = w->value.dim(2), kw = w->value.dim(3);
        if (x->requires_grad)
            x->ensure_grad().add_(
                kernels::conv_dinput(n.grad, w->value, stride, pad, x->value.dim(2), x->value.dim(3)));
        if (w->requires_grad || (b && b->requires_grad)) {
            auto& gw = w->ensure_grad();
            Tensor<T>* gb = nullptr;
            if (b && b->requires_grad) gb = &b->ensure_grad();
            kernels::conv_dweight(x->value, n.grad, kh, kw, stride, pad, gw, gb);
        }
    });
}

// Transposed convolution as a first-class op: forward applies the adjoint of
// conv2d(., w), which makes critic input-gradients expressible on the tape.
template <class T>
Var<T> conv2d_transpose(Graph<T>& g, Var<T> gy, Var<T> w, int64_t stride, int64_t pad, int64_t out_h,
                        int64_t out_w) {
    Tensor<T> y = kernels::conv_dinput(gy->value, w->value, stride, pad, out_h, out_w);
    return g.make(std::move(y), {gy, w}, [gy, w, stride, pad](Node<T>& n) {
        const int64_t kh = w->value.dim(2), kw = w->value.dim(3);
        if (gy->requires_grad)
            gy->ensure_grad().add_(
                kernels::conv_forward<T>(n.grad, w->value, nullptr, stride, pad));
        if (w->requires_grad) {
            auto& gw = w->ensure_grad();
            kernels::conv_dweight<T>(n.grad, gy->value, kh, kw, stride, pad, gw, nullptr);
        }
    });
}

template <class T>
Var<T> linear(Graph<T>& g, Var<T> x, Var<T> w, Var<T> b) {
    const int64_t N = x->value.dim(0), F = x->value.dim(1), O = w->value.dim(0);
    check_shape(w->value.dim(1) == F, "linear: weight features " + std::to_string(w->value.dim(1)) +
                                          " != input features " + std::to_string(F));
    Tensor<T> y({N, O});
    kernels::ConstMatMap<T> xm(x->value.data(), N, F);
    kernels::ConstMatMap<T> wm(w->value.data(), O, F);
    kernels::MatMap<T> ym(y.data(), N, O);
    ym.noalias() = xm * wm.transpose();
    if (b)
        for (int64_t n = 0; n < N; ++n)
            for (int64_t o = 0; o < O; ++o) y.at2(n, o) += b->value[o];
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return g.make(std::move(y), std::move(parents), [x, w, b, N, F, O](Node<T>& n) {
        kernels::ConstMatMap<T> gym(n.grad.data(), N, O);
        if (x->requires_grad) {
            auto& gx = x->ensure_grad();
            kernels::MatMap<T> gxm(gx.data(), N, F);
            kernels::ConstMatMap<T> wm(w->value.data(), O, F);
            gxm.noalias() += gym * wm;
        }
        if (w->requires_grad) {
            auto& gw = w->ensure_grad();
            kernels::MatMap<T> gwm(gw.data(), O, F);
            kernels::ConstMatMap<T> xm(x->value.data(), N, F);
            gwm.noalias() += gym.transpose() * xm;
        }
        if (b && b->requires_grad) {
            auto& gb = b->ensure_grad();
            for (int64_t i = 0; i < N; ++i)
                for (int64_t o = 0; o < O; ++o) gb[o] += n.grad.at2(i, o);
        }
    });
}

template <class T>
Var<T> global_mean_pool(Graph<T>& g, Var<T> x) {
    const int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    Tensor<T> y({N, C});
    const double inv = 1.0 / static_cast<double>(H * W);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            double s = 0.0;
            const T* p = x->value.data() + (n * C + c) * H * W;
            for (int64_t i = 0; i < H * W; ++i) s += p[i];
            y.at2(n, c) = static_cast<T>(s * inv);
        }
    return g.make(std::move(y), {x}, [x, N, C, H, W, inv](Node<T>& n) {
        auto& gx = x->ensure_grad();
        for (int64_t i = 0; i < N; ++i)
            for (int64_t c = 0; c < C; ++c) {
                const T gv = static_cast<T>(n.grad.at2(i, c) * inv);
                T* p = gx.data() + (i * C + c) * H * W;
                for (int64_t t = 0; t < H * W; ++t) p[t] += gv;
            }
    });
}

template <class T>
Var<T> avg_pool2(Graph<T>& g, Var<T> x) {
    const int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    const int64_t oh = H / 2, ow = W / 2;
    Tensor<T> y({N, C, oh, ow});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t yy = 0; yy < oh; ++yy)
                for (int64_t xx = 0; xx < ow; ++xx)
                    y.at4(n, c, yy, xx) =
                        static_cast<T>(0.25) * (x->value.at4(n, c, 2 * yy, 2 * xx) + x->value.at4(n, c, 2 * yy, 2 * xx + 1) +
                                                x->value.at4(n, c, 2 * yy + 1, 2 * xx) + x->value.at4(n, c, 2 * yy + 1, 2 * xx + 1));
    return g.make(std::move(y), {x}, [x, N, C, oh, ow](Node<T>& n) {
        auto& gx = x->ensure_grad();
        for (int64_t i = 0; i < N; ++i)
            for (int64_t c = 0; c < C; ++c)
                for (int64_t yy = 0; yy < oh; ++yy)
                    for (int64_t xx = 0; xx < ow; ++xx) {
                        const T gv = static_cast<T>(0.25) * n.grad.at4(i, c, yy, xx);
                        gx.at4(i, c, 2 * yy, 2 * xx) += gv;
                        gx.at4(i, c, 2 * yy, 2 * xx + 1) += gv;
                        gx.at4(i, c, 2 * yy + 1, 2 * xx) += gv;
                        gx.at4(i, c, 2 * yy + 1, 2 * xx + 1) += gv;
                    }
    });
}

template <class T>
Var<T> upsample_nearest2(Graph<T>& g, Var<T> x) {
    const int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    Tensor<T> y({N, C, H * 2, W * 2});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t yy = 0; yy < H; ++yy)
                for (int64_t xx = 0; xx < W; ++xx) {
                    const T v = x->value.at4(n, c, yy, xx);
                    y.at4(n, c, 2 * yy, 2 * xx) = v;
                    y.at4(n, c, 2 * yy, 2 * xx + 1) = v;
                    y.at4(n, c, 2 * yy + 1, 2 * xx) = v;
                    y.at4(n, c, 2 * yy + 1, 2 * xx + 1) = v;
                }
    return g.make(std::move(y), {x}, [x, N, C, H, W](Node<T>& n) {
        auto& gx = x->ensure_grad();
        for (int64_t i = 0; i < N; ++i)
            for (int64_t c = 0; c < C; ++c)
                for (int64_t yy = 0; yy < H; ++yy)
                    for (int64_t xx = 0; xx < W; ++xx)
                        gx.at4(i, c, yy, xx) += n.grad.at4(i, c, 2 * yy, 2 * xx) + n.grad.at4(i, c, 2 * yy, 2 * xx + 1) +
                                                n.grad.at4(i, c, 2 * yy + 1, 2 * xx) + n.grad.at4(i, c, 2 * yy + 1, 2 * xx + 1);
    });
}

template <class T>
Var<T> resize_bilinear(Graph<T>& g, Var<T> x, int64_t oh, int64_t ow) {
    const int64_t H = x->value.dim(2), W = x->value.dim(3);
    if (oh == H && ow == W) return x;
    Tensor<T> y = kernels::resize_bilinear(x->value, oh, ow);
    return g.make(std::move(y), {x}, [x, H, W](Node<T>& n) {
        x->ensure_grad().add_(kernels::resize_bilinear_adjoint(n.grad, H, W));
    });
}

template <class T>
Var<T> rotate(Graph<T>& g, Var<T> x, double angle_deg) {
    Tensor<T> y = kernels::rotate_bilinear(x->value, angle_deg, true);
    return g.make(std::move(y), {x}, [x, angle_deg](Node<T>& n) {
        x->ensure_grad().add_(kernels::rotate_bilinear(n.grad, angle_deg, false));
    });
}

template <class T>
Var<T> gaussian_blur(Graph<T>& g, Var<T> x, int64_t ksize) {
    Tensor<T> y = kernels::gaussian_blur(x->value, ksize, false);
    return g.make(std::move(y), {x}, [x, ksize](Node<T>& n) {
        x->ensure_grad().add_(kernels::gaussian_blur(n.grad, ksize, true));
    });
}

template <class T>
Var<T> slice_spatial(Graph<T>& g, Var<T> x, int64_t y0, int64_t x0, int64_t h, int64_t w) {
    const int64_t N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    check_shape(y0 >= 0 && x0 >= 0 && y0 + h <= H && x0 + w <= W, "slice_spatial: window out of bounds");
    Tensor<T> y({N, C, h, w});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t yy = 0; yy < h; ++yy)
                for (int64_t xx = 0; xx < w; ++xx) y.at4(n, c, yy, xx) = x->value.at4(n, c, y0 + yy, x0 + xx);
    return g.make(std::move(y), {x}, [x, y0, x0, h, w, N, C](Node<T>& n) {
        auto& gx = x->ensure_grad();
        for (int64_t i = 0; i < N; ++i)
            for (int64_t c = 0; c < C; ++c)
                for (int64_t yy = 0; yy < h; ++yy)
                    for (int64_t xx = 0; xx < w; ++xx) gx.at4(i, c, y0 + yy, x0 + xx) += n.grad.at4(i, c, yy, xx);
    });
}

// Tile a (N,C,B,B) block across space, cropping the final partial tile:
// out[c,y,x] = block[c, y mod B, x mod B].
template <class T>
Var<T> spatial_tile(Graph<T>& g, Var<T> block, int64_t target_h, int64_t target_w) {
    const int64_t N = block->value.dim(0), C = block->value.dim(1), B = block->value.dim(2);
    check_shape(block->value.dim(3) == B, "spatial_tile: block must be square");
    check(target_h >= 1 && target_w >= 1, "spatial_tile: target dims must be >= 1");
    Tensor<T> y({N, C, target_h, target_w});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t yy = 0; yy < target_h; ++yy)
                for (int64_t xx = 0; xx < target_w; ++xx)
                    y.at4(n, c, yy, xx) = block->value.at4(n, c, yy % B, xx % B);
    return g.make(std::move(y), {block}, [block, N, C, B, target_h, target_w](Node<T>& n) {
        auto& gb = block->ensure_grad();
        for (int64_t i = 0; i < N; ++i)
            for (int64_t c = 0; c < C; ++c)
                for (int64_t yy = 0; yy < target_h; ++yy)
                    for (int64_t xx = 0; xx < target_w; ++xx)
                        gb.at4(i, c, yy % B, xx % B) += n.grad.at4(i, c, yy, xx);
    });
}

// out(n,c,h,w) = v(c) * s
template <class T>
Var<T> broadcast_cvec(Graph<T>& g, Var<T> v, int64_t N, int64_t H, int64_t W, T s) {
    const int64_t C = v->value.numel();
    Tensor<T> y({N, C, H, W});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            T* p = y.data() + (n * C + c) * H * W;
            std::fill(p, p + H * W, v->value[c] * s);
        }
    return g.make(std::move(y), {v}, [v, N, H, W, s](Node<T>& n) {
        auto& gv = v->ensure_grad();
        const int64_t C = gv.numel();
        for (int64_t i = 0; i < N; ++i)
            for (int64_t c = 0; c < C; ++c) {
                double acc = 0.0;
                const T* p = n.grad.data() + (i * C + c) * H * W;
                for (int64_t t = 0; t < H * W; ++t) acc += p[t];
                gv[c] += static_cast<T>(acc * s);
            }
    });
}

// Forward runs an arbitrary (non-differentiable) transform; backward passes
// the gradient through unchanged.
template <class T>
Var<T> straight_through(Graph<T>& g, Var<T> x, const std::function<Tensor<T>(const Tensor<T>&)>& fn) {
    Tensor<T> y = fn(x->value);
    check_shape(y.same_shape(x->value), "straight_through: transform changed shape");
    return g.make(std::move(y), {x}, [x](Node<T>& n) { x->ensure_grad().add_(n.grad); });
}

// ----- reductions / losses (scalar results, double accumulation) -----

template <class T>
Var<T> mean_all(Graph<T>& g, Var<T> x) {
    const int64_t count = x->value.numel();
    double s = 0.0;
    for (int64_t i = 0; i < count; ++i) s += x->value[i];
    Tensor<T> y = Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(count)));
    return g.make(std::move(y), {x}, [x, count](Node<T>& n) {
        auto& gx = x->ensure_grad();
        const T gv = n.grad[0] / static_cast<T>(count);
        for (int64_t i = 0; i < count; ++i) gx[i] += gv;
    });
}

template <class T>
Var<T> mse_loss(Graph<T>& g, Var<T> a, Var<T> b) {
    check_shape(a->value.same_shape(b->value), "mse_loss: shape mismatch");
    const int64_t count = a->value.numel();
    double s = 0.0;
    for (int64_t i = 0; i < count; ++i) {
        const double d = static_cast<double>(a->value[i]) - static_cast<double>(b->value[i]);
        s += d * d;
    }
    Tensor<T> y = Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(count)));
    return g.make(std::move(y), {a, b}, [a, b, count](Node<T>& n) {
        const T c = n.grad[0] * T(2) / static_cast<T>(count);
        if (a->requires_grad) {
            auto& ga = a->ensure_grad();
            for (int64_t i = 0; i < count; ++i) ga[i] += c * (a->value[i] - b->value[i]);
        }
        if (b->requires_grad) {
            auto& gb = b->ensure_grad();
            for (int64_t i = 0; i < count; ++i) gb[i] -= c * (a->value[i] - b->value[i]);
        }
    });
}

// mean over all elements of max(x,0) - x*t + log(1 + exp(-|x|))
template <class T>
Var<T> bce_with_logits(Graph<T>& g, Var<T> logits, Tensor<T> targets) {
    check_shape(logits->value.same_shape(targets), "bce_with_logits: shape mismatch");
    const int64_t count = logits->value.numel();
    double s = 0.0;
    for (int64_t i = 0; i < count; ++i) {
        const double x = logits->value[i];
        const double t = targets[i];
        s += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
    Tensor<T> y = Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(count)));
    return g.make(std::move(y), {logits}, [logits, tg = std::move(targets), count](Node<T>& n) {
        auto& gx = logits->ensure_grad();
        const T c = n.grad[0] / static_cast<T>(count);
        for (int64_t i = 0; i < count; ++i) {
            const double x = logits->value[i];
            const double sig = 1.0 / (1.0 + std::exp(-x));
            gx[i] += c * static_cast<T>(sig - static_cast<double>(tg[i]));
        }
    });
}

// per-sample sum of squares over all non-batch dims: (N,...) -> (N,)
template <class T>
Var<T> sumsq_per_sample(Graph<T>& g, Var<T> x) {
    const int64_t N = x->value.dim(0);
    const int64_t stride = x->value.numel() / N;
    Tensor<T> y({N});
    for (int64_t n = 0; n < N; ++n) {
        double s = 0.0;
        const T* p = x->value.data() + n * stride;
        for (int64_t i = 0; i < stride; ++i) s += static_cast<double>(p[i]) * static_cast<double>(p[i]);
        y[n] = static_cast<T>(s);
    }
    return g.make(std::move(y), {x}, [x, N, stride](Node<T>& n) {
        auto& gx = x->ensure_grad();
        for (int64_t i = 0; i < N; ++i) {
            const T gv = n.grad[i];
            const T* p = x->value.data() + i * stride;
            T* gp = gx.data() + i * stride;
            for (int64_t t = 0; t < stride; ++t) gp[t] += gv * T(2) * p[t];
        }
    });
}

template <class T>
Var<T> sqrt_eps(Graph<T>& g, Var<T> x, T eps) {
    Tensor<T> y = x->value;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::sqrt(y[i] + eps);
    return g.make(std::move(y), {x}, [x](Node<T>& n) {
        auto& gx = x->ensure_grad();
        for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += n.grad[i] / (T(2) * n.value[i]);
    });
}

template <class T>
Var<T> square(Graph<T>& g, Var<T> x) {
    Tensor<T> y = x->value;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] *= y[i];
    return g.make(std::move(y), {x}, [x](Node<T>& n) {
        auto& gx = x->ensure_grad();
        for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += n.grad[i] * T(2) * x->value[i];
    });
}

// scalar helpers (shape {1} tensors)
template <class T>
Var<T> s_add(Graph<T>& g, Var<T> a, Var<T> b) {
    return add(g, a, b);
}

template <class T>
Var<T> s_axpy(Graph<T>& g, T c, Var<T> a, Var<T> b) {  // c*a + b
    return add(g, scale(g, a, c), b);
}

template <class T>
Var<T> s_neg_mean(Graph<T>& g, Var<T> x) {  // -mean(x)
    return scale(g, mean_all(g, x), T(-1));
}

}  // namespace latentmark::nn
