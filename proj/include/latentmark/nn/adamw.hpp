#pragma once

#include <cmath>
#include <vector>

#include "latentmark/nn/graph.hpp"

namespace latentmark::nn {

// Decoupled weight decay Adam (AdamW).
template <class T>
class AdamW {
public:
    explicit AdamW(double lr, double weight_decay = 0.01, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {}

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    // Applies one update to every bound param using the grads accumulated on
    // the graph leaves. Params without grad (unused this step) are skipped.
    void step(const std::vector<std::pair<Param<T>*, Var<T>>>& bound) {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (auto& [p, v] : bound) {
            if (!v->has_grad()) continue;
            auto& grad = v->grad;
            for (int64_t i = 0; i < p->value.numel(); ++i) {
                const double gi = grad[i];
                const double m = b1_ * p->m[i] + (1.0 - b1_) * gi;
                const double vv = b2_ * p->v[i] + (1.0 - b2_) * gi * gi;
                p->m[i] = static_cast<T>(m);
                p->v[i] = static_cast<T>(vv);
                const double mhat = m / bc1;
                const double vhat = vv / bc2;
                double x = p->value[i];
                x -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * x);
                p->value[i] = static_cast<T>(x);
            }
        }
    }

private:
    double lr_, wd_, b1_, b2_, eps_;
    int64_t t_ = 0;
};

}  // namespace latentmark::nn
