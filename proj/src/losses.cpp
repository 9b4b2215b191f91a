#include "latentmark/trainer/losses.hpp"

namespace latentmark::trainer {

double distortion_loss(const ImageGrid& x_w, const ImageGrid& x) {
    nn::Graph<real_t> g;
    auto l = nn::mse_loss(g, g.constant(x_w.values), g.constant(x.values));
    return l->value[0];
}

double extraction_loss(const std::vector<real_t>& logits, const BitMessage& m) {
    check_shape(static_cast<int>(logits.size()) == m.k(),
                "extraction_loss: got " + std::to_string(logits.size()) + " logits for k=" +
                    std::to_string(m.k()));
    nn::Graph<real_t> g;
    nn::Tensor<real_t> lt({1, static_cast<int64_t>(logits.size())});
    for (size_t i = 0; i < logits.size(); ++i) lt[static_cast<int64_t>(i)] = logits[i];
    auto l = nn::bce_with_logits(g, g.constant(std::move(lt)), messages_to_targets<real_t>({m}));
    return l->value[0];
}

double PerceptualLoss::operator()(const ImageGrid& a, const ImageGrid& b) const {
    nn::Graph<real_t> g;
    auto d = pyramid.distance(g, g.constant(to_batch(a.values)), g.constant(to_batch(b.values)));
    return d->value[0];
}

std::pair<double, double> critic_losses(const Critic& critic, const std::vector<ImageGrid>& x_w_batch,
                                        const std::vector<ImageGrid>& x_batch) {
    check(!x_w_batch.empty() && !x_batch.empty(), "critic_losses: empty batch");
    auto stack = [](const std::vector<ImageGrid>& imgs) {
        const int64_t N = static_cast<int64_t>(imgs.size());
        const auto& s = imgs[0].values.shape();
        nn::Tensor<real_t> t({N, s[0], s[1], s[2]});
        for (int64_t n = 0; n < N; ++n) {
            check_shape(imgs[static_cast<size_t>(n)].values.shape() == s, "critic_losses: ragged batch");
            std::copy(imgs[static_cast<size_t>(n)].values.data(),
                      imgs[static_cast<size_t>(n)].values.data() + imgs[static_cast<size_t>(n)].values.numel(),
                      t.data() + n * imgs[static_cast<size_t>(n)].values.numel());
        }
        return t;
    };
    nn::Graph<real_t> g;
    nn::Binder<real_t> bind(g);
    auto s_w = critic.net.forward(g, bind, g.constant(stack(x_w_batch)), false);
    auto s_c = critic.net.forward(g, bind, g.constant(stack(x_batch)), false);
    auto mean_w = nn::mean_all(g, s_w);
    auto mean_c = nn::mean_all(g, s_c);
    const double l_adv_dw = -mean_w->value[0];
    const double l_adv_c = static_cast<double>(mean_w->value[0]) - static_cast<double>(mean_c->value[0]);
    return {l_adv_dw, l_adv_c};
}

}  // namespace latentmark::trainer
