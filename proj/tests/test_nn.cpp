#include <doctest.h>

#include "latentmark/nn/adamw.hpp"
#include "latentmark/nn/checkpoint.hpp"
#include "latentmark/nn/modules.hpp"
#include "test_util.hpp"

using namespace lmtest;
using latentmark::nn::Graph;
using latentmark::nn::Tensor;
using latentmark::nn::Var;

TEST_CASE("elementwise op gradients") {
    Rng rng(1);
    auto a = random_tensor({2, 3, 4, 4}, rng);
    auto b = random_tensor({2, 3, 4, 4}, rng);

    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::mul(g, nn::add(g, v[0], v[1]), nn::sub(g, v[0], v[1])));
    }, {a, b});

    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::tanh_act(g, nn::scale(g, v[0], 1.7)));
    }, {a});

    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::leaky_relu(g, v[0], 0.2));
    }, {a}, 1e-6, 1e-4);  // kinks: tiny step, looser tol

    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::add_scalar(g, v[0], 0.3)));
    }, {a});
}

TEST_CASE("conv2d gradients (stride 1 and 2)") {
    Rng rng(2);
    auto x = random_tensor({2, 3, 6, 6}, rng);
    auto w = random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5);
    auto bias = random_tensor({4}, rng, -0.2, 0.2);
    for (int stride : {1, 2}) {
        gradcheck([stride](Graph<double>& g, std::vector<Var<double>>& v) {
            return nn::mean_all(g, nn::conv2d(g, v[0], v[1], v[2], stride, 1));
        }, {x, w, bias});
    }
}

TEST_CASE("conv2d_transpose gradients") {
    Rng rng(3);
    auto gy = random_tensor({2, 4, 3, 3}, rng);
    auto w = random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5);
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::conv2d_transpose(g, v[0], v[1], 2, 1, 6, 6)));
    }, {gy, w});
}

TEST_CASE("linear / pool / upsample / reshape gradients") {
    Rng rng(4);
    auto x = random_tensor({3, 5}, rng);
    auto w = random_tensor({2, 5}, rng);
    auto b = random_tensor({2}, rng);
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::linear(g, v[0], v[1], v[2])));
    }, {x, w, b});

    auto img = random_tensor({2, 3, 6, 6}, rng);
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::global_mean_pool(g, v[0])));
    }, {img});
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::avg_pool2(g, v[0])));
    }, {img});
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::upsample_nearest2(g, v[0])));
    }, {img});
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::reshape(g, v[0], {2, 3 * 36})));
    }, {img});
}

TEST_CASE("geometry op gradients") {
    Rng rng(5);
    auto img = random_tensor({1, 3, 8, 8}, rng);
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::resize_bilinear(g, v[0], 5, 11)));
    }, {img});
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::rotate(g, v[0], 17.0)));
    }, {img});
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::gaussian_blur(g, v[0], 5)));
    }, {img});
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::slice_spatial(g, v[0], 1, 2, 5, 4)));
    }, {img});
}

TEST_CASE("tile / broadcast / losses gradients") {
    Rng rng(6);
    auto block = random_tensor({2, 3, 2, 2}, rng);
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::spatial_tile(g, v[0], 5, 7)));
    }, {block});

    auto vec = random_tensor({4}, rng);
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mean_all(g, nn::square(g, nn::broadcast_cvec(g, v[0], 2, 3, 3, 0.5)));
    }, {vec});

    auto a = random_tensor({2, 3, 4, 4}, rng);
    auto b = random_tensor({2, 3, 4, 4}, rng);
    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::mse_loss(g, v[0], v[1]);
    }, {a, b});

    auto logits = random_tensor({3, 7}, rng, -2, 2);
    Tensor<double> targets({3, 7});
    Rng trng(7);
    for (int64_t i = 0; i < targets.numel(); ++i) targets[i] = trng.bernoulli(0.5) ? 1.0 : 0.0;
    gradcheck([targets](Graph<double>& g, std::vector<Var<double>>& v) {
        return nn::bce_with_logits(g, v[0], targets);
    }, {logits});

    gradcheck([](Graph<double>& g, std::vector<Var<double>>& v) {
        auto n = nn::sqrt_eps(g, nn::sumsq_per_sample(g, v[0]), 1e-12);
        return nn::mean_all(g, nn::square(g, nn::add_scalar(g, n, -1.0)));
    }, {a});
}

TEST_CASE("bce matches the analytic value at zero logits") {
    Graph<double> g;
    Tensor<double> logits({1, 8});
    Tensor<double> targets({1, 8});
    for (int64_t i = 0; i < 8; ++i) targets[i] = i % 2;
    auto l = nn::bce_with_logits(g, g.leaf(logits, false), targets);
    CHECK(l->value[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("adamw moves params against the gradient") {
    Rng rng(8);
    latentmark::nn::Param<double> p("p", random_tensor({4}, rng));
    p.reset_moments();
    const double before = p.value[0];
    latentmark::nn::AdamW<double> opt(1e-2, 0.0);
    for (int step = 0; step < 5; ++step) {
        Graph<double> g;
        latentmark::nn::Binder<double> bind(g);
        auto v = bind(p);
        auto loss = nn::mean_all(g, nn::square(g, v));
        g.backward(loss);
        opt.step(bind.bound());
    }
    CHECK(std::abs(p.value[0]) < std::abs(before));
}

TEST_CASE("checkpoint round trip and checksum stability") {
    Rng rng(9);
    latentmark::nn::TensorArchive a;
    a.manifest["kind"] = "test";
    auto t1 = random_tensor({3, 4}, rng);
    auto t2 = random_tensor({2, 2, 2, 2}, rng);
    a.add("t1", t1);
    a.add("t2", t2);
    const auto sum = a.checksum_hex();
    a.save("/tmp/lm_test_ckpt.bin");
    auto b = latentmark::nn::TensorArchive::load("/tmp/lm_test_ckpt.bin");
    CHECK(b.checksum_hex() == sum);
    auto r1 = b.get<double>("t1");
    for (int64_t i = 0; i < t1.numel(); ++i) CHECK(r1[i] == doctest::Approx(t1[i]).epsilon(1e-7));
    CHECK(b.manifest.at("kind") == "test");
    CHECK_THROWS(b.get<double>("missing"));
}
