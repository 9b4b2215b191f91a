#pragma once

#include <utility>
#include <vector>

#include "latentmark/core/bit_message.hpp"
#include "latentmark/core/grids.hpp"
#include "latentmark/nn/ops.hpp"
#include "latentmark/trainer/critic.hpp"
#include "latentmark/trainer/perceptual.hpp"

namespace latentmark::trainer {

// Loss composition. These helpers are the single source of the arithmetic so
// the logged values, the optimized graph and the tests agree bit-for-bit
// (the build disables FP contraction).
template <class T>
T compose_rec_loss(T l_I, T l_lpips, T l_adv_dw, T lambda_I, T lambda_LPIPS, T lambda_adv) {
    T a = l_I * lambda_I;
    T b = l_lpips * lambda_LPIPS;
    T c = l_adv_dw * lambda_adv;
    T s = a + b;
    return s + c;
}

template <class T>
T compose_total_loss(T l_rec, T l_ext, T lambda) {
    T e = l_ext * lambda;
    return l_rec + e;
}

// graph versions, same operation order
template <class T>
nn::Var<T> compose_rec_loss_var(nn::Graph<T>& g, nn::Var<T> l_I, nn::Var<T> l_lpips, nn::Var<T> l_adv_dw,
                                T lambda_I, T lambda_LPIPS, T lambda_adv) {
    auto a = nn::scale(g, l_I, lambda_I);
    auto b = nn::scale(g, l_lpips, lambda_LPIPS);
    auto c = nn::scale(g, l_adv_dw, lambda_adv);
    return nn::add(g, nn::add(g, a, b), c);
}

template <class T>
nn::Var<T> compose_total_loss_var(nn::Graph<T>& g, nn::Var<T> l_rec, nn::Var<T> l_ext, T lambda) {
    return nn::add(g, l_rec, nn::scale(g, l_ext, lambda));
}

struct LossBreakdown {
    double l_I = 0;
    double l_lpips = 0;
    double l_adv_dw = 0;
    double l_adv_c = 0;
    double l_ext = 0;
    double l_rec = 0;
    double l_total = 0;
};

// message bits as {0,1} targets for the extraction head
template <class T>
nn::Tensor<T> messages_to_targets(const std::vector<BitMessage>& msgs) {
    const int64_t n = static_cast<int64_t>(msgs.size());
    const int64_t k = msgs.empty() ? 0 : msgs[0].k();
    nn::Tensor<T> t({n, k});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < k; ++j)
            t.at2(i, j) = static_cast<T>(msgs[static_cast<size_t>(i)].bit(static_cast<int>(j)));
    return t;
}

// ----- plain evaluative forms of the per-step losses -----

double distortion_loss(const ImageGrid& x_w, const ImageGrid& x);
double extraction_loss(const std::vector<real_t>& logits, const BitMessage& m);

class PerceptualLoss {
public:
    PerceptualLoss() = default;
    explicit PerceptualLoss(const std::string& weights_path) {
        if (!weights_path.empty()) pyramid.load(weights_path);
    }
    double operator()(const ImageGrid& a, const ImageGrid& b) const;
    mutable PerceptualPyramid<real_t> pyramid;
};

// (l_adv_dw, l_adv_c) over image batches, evaluated with one critic state
std::pair<double, double> critic_losses(const Critic& critic, const std::vector<ImageGrid>& x_w_batch,
                                        const std::vector<ImageGrid>& x_batch);

}  // namespace latentmark::trainer
