#include <doctest.h>

#include "latentmark/embedder/embedder.hpp"
#include "latentmark/extractor/extractor.hpp"
#include "latentmark/nn/adamw.hpp"
#include "latentmark/trainer/losses.hpp"

using namespace latentmark;

namespace {

WatermarkConfig small_cfg() {
    WatermarkConfig c;
    c.k = 8;
    c.B = 4;
    c.image_size = 32;
    c.stage_channels = {12, 10, 8, 6};
    c.downsample_factor = 8;
    return c;
}

nn::Tensor<real_t> random_latent(const ae::Autoencoder& a, int S, uint64_t seed) {
    Rng rng(seed);
    nn::Tensor<real_t> t({a.latent_channels(), S / a.f(), S / a.f()});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<real_t>(rng.normal());
    return t;
}

}  // namespace

TEST_CASE("spatial tiling satisfies the mod-B index identity") {
    Rng rng(1);
    nn::Tensor<real_t> block({3, 8, 8});
    for (int64_t i = 0; i < block.numel(); ++i) block[i] = static_cast<real_t>(rng.uniform(-1, 1));

    // identity case
    auto same = embedder::tile_block(block, 8, 8);
    for (int64_t i = 0; i < block.numel(); ++i) CHECK(same[i] == block[i]);

    // exact repetition, including a cropped partial tile at 12x12
    for (auto [h, w] : {std::pair<int64_t, int64_t>{16, 16}, {12, 12}, {8, 21}, {3, 5}}) {
        auto tiled = embedder::tile_block(block, h, w);
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x)
                    CHECK(tiled.at3(c, y, x) == block.at3(c, y % 8, x % 8));
    }

    // congruent positions agree where both exist
    auto t12 = embedder::tile_block(block, 12, 12);
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y + 8 < 12; ++y)
            for (int64_t x = 0; x < 12; ++x) CHECK(t12.at3(c, y, x) == t12.at3(c, y + 8, x));

    // B=2 block tiled to 4x4: each quadrant equals the block
    nn::Tensor<real_t> b2({1, 2, 2});
    for (int64_t i = 0; i < 4; ++i) b2[i] = static_cast<real_t>(i + 1);
    auto q = embedder::tile_block(b2, 4, 4);
    for (int64_t y = 0; y < 4; ++y)
        for (int64_t x = 0; x < 4; ++x) CHECK(q.at3(0, y, x) == b2.at3(0, y % 2, x % 2));
}

TEST_CASE("noise block shape and message sensitivity") {
    const auto cfg = small_cfg();
    ae::Autoencoder a(cfg, 2);
    embedder::EmbedderStack stack(a, cfg.k, cfg.B, 3);
    const BitMessage m0 = BitMessage::random(cfg.k, 0);
    const BitMessage m1 = BitMessage::random(cfg.k, 1);
    REQUIRE(m0 != m1);

    for (int s = 0; s < stack.num_modules(); ++s) {
        auto blk = stack.make_noise_block(s, m0);
        CHECK(blk.shape() == nn::Shape{a.stage_channels()[static_cast<size_t>(s)], cfg.B, cfg.B});
        CHECK(blk.all_finite());
        // random linear weights: distinct messages give distinct blocks
        auto blk1 = stack.make_noise_block(s, m1);
        real_t diff = 0;
        for (int64_t i = 0; i < blk.numel(); ++i) diff = std::max(diff, std::abs(blk[i] - blk1[i]));
        CHECK(diff > 0);
    }

    // zero linear map -> zero block for any message
    embedder::EmbedderStack zeroed(a, cfg.k, cfg.B, 4);
    for (auto& mod : zeroed.modules) {
        mod.map.w.value.fill(0);
        mod.map.b.value.fill(0);
    }
    auto z0 = zeroed.make_noise_block(1, m0);
    for (int64_t i = 0; i < z0.numel(); ++i) CHECK(z0[i] == 0);

    CHECK_THROWS_AS(stack.make_noise_block(0, BitMessage::random(5, 0)), ShapeError);
}

TEST_CASE("freshly initialized modules produce exactly zero residuals") {
    const auto cfg = small_cfg();
    ae::Autoencoder a(cfg, 5);
    embedder::EmbedderStack stack(a, cfg.k, cfg.B, 6);
    Rng rng(7);
    for (int s = 0; s < stack.num_modules(); ++s) {
        const int64_t C = a.stage_channels()[static_cast<size_t>(s)];
        const int64_t hw = 4LL << s;  // tap resolutions for a 32px image at f=8
        nn::Tensor<real_t> zi({C, hw, hw});
        for (int64_t i = 0; i < zi.numel(); ++i) zi[i] = static_cast<real_t>(rng.uniform(-10, 10));
        LatentGrid delta = stack.embed_residual(s, LatentGrid(zi, s), BitMessage::random(cfg.k, rng.next_u64()));
        CHECK(delta.values.shape() == zi.shape());
        for (int64_t i = 0; i < delta.values.numel(); ++i) CHECK(delta.values[i] == 0);
    }
}

TEST_CASE("zero-init identity: watermarked decode equals plain decode bit-for-bit") {
    const auto cfg = small_cfg();
    ae::Autoencoder a(cfg, 8);
    embedder::EmbedderStack stack(a, cfg.k, cfg.B, 9);
    Rng rng(10);
    for (int rep = 0; rep < 10; ++rep) {
        LatentGrid z(random_latent(a, 32, rng.next_u64()), 0);
        const BitMessage m = BitMessage::random(cfg.k, rng.next_u64());
        ImageGrid plain = a.decode(z);
        ImageGrid wm = stack.decode_watermarked(z, m);
        for (int64_t i = 0; i < plain.values.numel(); ++i) CHECK(plain.values[i] == wm.values[i]);
    }
}

TEST_CASE("watermark_cover_image is the identity at zero init") {
    const auto cfg = small_cfg();
    ae::Autoencoder a(cfg, 11);
    embedder::EmbedderStack stack(a, cfg.k, cfg.B, 12);
    Rng rng(13);
    nn::Tensor<real_t> xv({3, 32, 32});
    for (int64_t i = 0; i < xv.numel(); ++i) xv[i] = static_cast<real_t>(rng.uniform(-0.9, 0.9));
    ImageGrid x(xv, ImageSource::cover);
    ImageGrid xw = stack.watermark_cover_image(x, BitMessage::random(cfg.k, 1));
    for (int64_t i = 0; i < xv.numel(); ++i) CHECK(xw.values[i] == x.values[i]);
}

TEST_CASE("residual mask identity holds on unclamped pixels after perturbing weights") {
    const auto cfg = small_cfg();
    ae::Autoencoder a(cfg, 14);
    embedder::EmbedderStack stack(a, cfg.k, cfg.B, 15);
    Rng rng(16);
    // make the stack non-trivial
    for (auto& mod : stack.modules)
        for (int64_t i = 0; i < mod.fuse.w.value.numel(); ++i)
            mod.fuse.w.value[i] = static_cast<real_t>(rng.uniform(-0.05, 0.05));

    nn::Tensor<real_t> xv({3, 32, 32});
    for (int64_t i = 0; i < xv.numel(); ++i) xv[i] = static_cast<real_t>(rng.uniform(-0.8, 0.8));
    ImageGrid x(xv, ImageSource::cover);
    const BitMessage m = BitMessage::random(cfg.k, 17);

    LatentGrid z = a.encode(x);
    auto mask = stack.watermark_mask(z, m);
    ImageGrid xw = stack.watermark_cover_image(x, m);
    int unclamped = 0;
    for (int64_t i = 0; i < xv.numel(); ++i) {
        const real_t raw = x.values[i] + mask[i];
        if (raw > -1 && raw < 1) {
            CHECK(xw.values[i] == raw);
            ++unclamped;
        } else {
            CHECK(xw.values[i] == std::clamp(raw, real_t(-1), real_t(1)));
        }
    }
    CHECK(unclamped > 0);
}

TEST_CASE("after one training step every module has a nonzero gradient") {
    const auto cfg = small_cfg();
    ae::Autoencoder a(cfg, 18);
    embedder::EmbedderStack stack(a, cfg.k, cfg.B, 19);
    extractor::Extractor ext(cfg.k, cfg.image_size, 20);

    Rng rng(21);
    nn::Tensor<real_t> zb({2, a.latent_channels(), 4, 4});
    for (int64_t i = 0; i < zb.numel(); ++i) zb[i] = static_cast<real_t>(rng.normal());
    std::vector<BitMessage> msgs{BitMessage::random(cfg.k, 1), BitMessage::random(cfg.k, 2)};

    nn::Graph<real_t> g;
    nn::Binder<real_t> bind(g);
    auto msg_pm = g.constant(embedder::messages_to_pm1<real_t>(msgs));
    auto xw = stack.decode_watermarked_batch(g, bind, g.constant(zb), msg_pm, true);
    auto logits = ext.forward_batch(g, bind, xw, true);
    auto loss = nn::bce_with_logits(g, logits, trainer::messages_to_targets<real_t>(msgs));
    g.backward(loss);

    // map bound grads back to the stack's modules
    for (auto& mod : stack.modules) {
        bool any_nonzero = false;
        bool fuse_nonzero = false;
        for (auto& [p, v] : bind.bound()) {
            const bool is_fuse = (p == &mod.fuse.w || p == &mod.fuse.b);
            const bool is_mine = is_fuse || p == &mod.map.w || p == &mod.map.b;
            if (!is_mine || !v->has_grad()) continue;
            for (int64_t i = 0; i < v->grad.numel(); ++i)
                if (v->grad[i] != 0) {
                    any_nonzero = true;
                    if (is_fuse) fuse_nonzero = true;
                }
        }
        CHECK(any_nonzero);
        // the zero-init conv must not block learning: its input (the tiled
        // block) is nonzero, so its weight gradient is nonzero
        CHECK(fuse_nonzero);
    }
}

TEST_CASE("embedder checkpoint binds to its autoencoder checksum") {
    const auto cfg = small_cfg();
    ae::Autoencoder a(cfg, 22);
    embedder::EmbedderStack stack(a, cfg.k, cfg.B, 23);
    stack.save("/tmp/lm_emb_test.ckpt");
    auto back = embedder::EmbedderStack::load_file("/tmp/lm_emb_test.ckpt", a);
    CHECK(back.k() == cfg.k);
    CHECK(back.weights_checksum() == stack.weights_checksum());

    ae::Autoencoder other(cfg, 999);  // different weights -> different checksum
    CHECK_THROWS_WITH_AS(embedder::EmbedderStack::load_file("/tmp/lm_emb_test.ckpt", other),
                         doctest::Contains("checksum"), ValidationError);
}
