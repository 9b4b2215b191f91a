#pragma once

#include <string>

#include "latentmark/core/grids.hpp"
#include "latentmark/nn/checkpoint.hpp"
#include "latentmark/nn/modules.hpp"

namespace latentmark::trainer {

// Wasserstein critic: three stride-2 convs, global mean pool, linear score.
// Lipschitz control is a gradient penalty; the input-gradient is built out of
// tape ops (transposed convs against constant leaky-relu masks), so the
// penalty backpropagates into the weights without a second autodiff pass.
template <class T>
struct CriticNet {
    nn::Conv2d<T> c1, c2, c3;
    nn::Linear<T> head;

    CriticNet() = default;
    explicit CriticNet(Rng& rng)
        : c1("critic.c1", 3, 12, 3, 2, rng),
          c2("critic.c2", 12, 24, 3, 2, rng),
          c3("critic.c3", 24, 32, 3, 2, rng),
          head("critic.head", 32, 1, rng) {}

    nn::Var<T> forward(nn::Graph<T>& g, nn::Binder<T>& bind, nn::Var<T> x, bool trainable) {
        auto h = nn::leaky_relu(g, c1(g, bind, x, trainable));
        h = nn::leaky_relu(g, c2(g, bind, h, trainable));
        h = nn::leaky_relu(g, c3(g, bind, h, trainable));
        return head(g, bind, nn::global_mean_pool(g, h), trainable);  // (N,1)
    }

    // mean over the batch of (||d C(x)/dx||_2 - 1)^2 at the given points
    nn::Var<T> gradient_penalty(nn::Graph<T>& g, nn::Binder<T>& bind, const nn::Tensor<T>& x_at) {
        const int64_t N = x_at.dim(0), H = x_at.dim(2), W = x_at.dim(3);
        // plain forward to collect leaky-relu masks (constants under a.e.
        // differentiation)
        auto mask_of = [](const nn::Tensor<T>& pre) {
            nn::Tensor<T> m(pre.shape());
            for (int64_t i = 0; i < pre.numel(); ++i) m[i] = pre[i] >= T(0) ? T(1) : T(0.2);
            return m;
        };
        auto act = [&](nn::Tensor<T> pre) {
            for (int64_t i = 0; i < pre.numel(); ++i)
                if (pre[i] < T(0)) pre[i] *= T(0.2);
            return pre;
        };
        nn::Tensor<T> y1 = nn::kernels::conv_forward(x_at, c1.w.value, &c1.b.value, 2, 1);
        nn::Tensor<T> a1 = act(y1);
        nn::Tensor<T> y2 = nn::kernels::conv_forward(a1, c2.w.value, &c2.b.value, 2, 1);
        nn::Tensor<T> a2 = act(y2);
        nn::Tensor<T> y3 = nn::kernels::conv_forward(a2, c3.w.value, &c3.b.value, 2, 1);
        const int64_t H3 = y3.dim(2), W3 = y3.dim(3);

        auto w1 = bind(c1.w), w2 = bind(c2.w), w3 = bind(c3.w);
        auto v = nn::reshape(g, bind(head.w), {head.w.value.dim(1)});
        const T pool_scale = T(1) / static_cast<T>(H3 * W3);
        auto g3 = nn::mul_const(g, nn::broadcast_cvec(g, v, N, H3, W3, pool_scale), mask_of(y3));
        auto g2 = nn::mul_const(g, nn::conv2d_transpose(g, g3, w3, 2, 1, y2.dim(2), y2.dim(3)), mask_of(y2));
        auto g1 = nn::mul_const(g, nn::conv2d_transpose(g, g2, w2, 2, 1, y1.dim(2), y1.dim(3)), mask_of(y1));
        auto gx = nn::conv2d_transpose(g, g1, w1, 2, 1, H, W);
        auto norm = nn::sqrt_eps(g, nn::sumsq_per_sample(g, gx), T(1e-12));
        return nn::mean_all(g, nn::square(g, nn::add_scalar(g, norm, T(-1))));
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> p;
        for (auto* q : c1.params()) p.push_back(q);
        for (auto* q : c2.params()) p.push_back(q);
        for (auto* q : c3.params()) p.push_back(q);
        for (auto* q : head.params()) p.push_back(q);
        return p;
    }
};

class Critic {
public:
    explicit Critic(uint64_t init_seed) {
        Rng rng(init_seed ^ 0xc417cULL);
        net = CriticNet<real_t>(rng);
    }

    double score(const ImageGrid& img) const;

    void save(const std::string& path) const;
    static Critic load_file(const std::string& path);

    std::vector<nn::Param<real_t>*> params() const { return net.params(); }

    mutable CriticNet<real_t> net;

private:
    Critic() = default;
};

}  // namespace latentmark::trainer
