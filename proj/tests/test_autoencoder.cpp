#include <doctest.h>

#include "latentmark/ae/autoencoder.hpp"

using namespace latentmark;

namespace {

WatermarkConfig small_cfg() {
    WatermarkConfig c;
    c.k = 8;
    c.image_size = 32;
    c.stage_channels = {12, 10, 8, 6};
    c.downsample_factor = 8;
    return c;
}

nn::Tensor<real_t> random_image(int S, uint64_t seed) {
    Rng rng(seed);
    nn::Tensor<real_t> t({3, S, S});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<real_t>(rng.uniform(-0.9, 0.9));
    return t;
}

nn::Tensor<real_t> random_latent(const ae::Autoencoder& a, int S, uint64_t seed) {
    Rng rng(seed);
    nn::Tensor<real_t> t({a.latent_channels(), S / a.f(), S / a.f()});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<real_t>(rng.normal());
    return t;
}

}  // namespace

TEST_CASE("encode/decode shape arithmetic") {
    const auto cfg = small_cfg();
    ae::Autoencoder a(cfg, 3);
    ImageGrid x(random_image(32, 1), ImageSource::cover);
    LatentGrid z = a.encode(x);
    CHECK(z.values.shape() == nn::Shape{4, 4, 4});
    ImageGrid xr = a.decode(z);
    CHECK(xr.values.shape() == nn::Shape{3, 32, 32});
}

TEST_CASE("encode rejects resolutions not divisible by f") {
    ae::Autoencoder a(small_cfg(), 3);
    ImageGrid x(random_image(36, 2), ImageSource::cover);  // 36 % 8 != 0
    CHECK_THROWS_AS(a.encode(x), ShapeError);
}

TEST_CASE("decode rejects latent channel mismatch") {
    ae::Autoencoder a(small_cfg(), 3);
    nn::Tensor<real_t> bad({7, 4, 4});
    CHECK_THROWS_AS(a.decode(LatentGrid(bad, 0)), ShapeError);
}

TEST_CASE("decode is deterministic bit-for-bit") {
    ae::Autoencoder a(small_cfg(), 4);
    LatentGrid z(random_latent(a, 32, 5), 0);
    ImageGrid a1 = a.decode(z);
    ImageGrid a2 = a.decode(z);
    for (int64_t i = 0; i < a1.values.numel(); ++i) CHECK(a1.values[i] == a2.values[i]);
}

TEST_CASE("constant-zero image yields a finite latent") {
    ae::Autoencoder a(small_cfg(), 4);
    nn::Tensor<real_t> zero({3, 32, 32});
    LatentGrid z = a.encode(ImageGrid(zero, ImageSource::cover));
    CHECK(z.values.all_finite());
}

TEST_CASE("identity taps reproduce plain decode exactly") {
    ae::Autoencoder a(small_cfg(), 6);
    LatentGrid z(random_latent(a, 32, 7), 0);
    ImageGrid plain = a.decode(z);

    int taps_seen = 0;
    ae::Tap identity = [&](int, const nn::Tensor<real_t>& h) {
        ++taps_seen;
        return h;
    };
    ImageGrid staged = a.decode_staged(z, identity);
    CHECK(taps_seen == a.num_stages());
    for (int64_t i = 0; i < plain.values.numel(); ++i) CHECK(plain.values[i] == staged.values[i]);

    // adding zero at every stage is also bit-identical
    ae::Tap add_zero = [](int, const nn::Tensor<real_t>& h) {
        nn::Tensor<real_t> out = h;
        for (int64_t i = 0; i < out.numel(); ++i) out[i] += real_t(0);
        return out;
    };
    ImageGrid staged0 = a.decode_staged(z, add_zero);
    for (int64_t i = 0; i < plain.values.numel(); ++i) CHECK(plain.values[i] == staged0.values[i]);
}

TEST_CASE("zeroing the stage-0 latent changes the output") {
    ae::Autoencoder a(small_cfg(), 8);
    LatentGrid z(random_latent(a, 32, 9), 0);
    ImageGrid plain = a.decode(z);
    ae::Tap zero0 = [](int stage, const nn::Tensor<real_t>& h) {
        if (stage != 0) return h;
        return nn::Tensor<real_t>(h.shape());
    };
    ImageGrid changed = a.decode_staged(z, zero0);
    real_t diff = 0;
    for (int64_t i = 0; i < plain.values.numel(); ++i)
        diff = std::max(diff, std::abs(plain.values[i] - changed.values[i]));
    CHECK(diff > 0);
}

TEST_CASE("tap with wrong shape names the stage") {
    ae::Autoencoder a(small_cfg(), 8);
    LatentGrid z(random_latent(a, 32, 10), 0);
    ae::Tap bad = [](int stage, const nn::Tensor<real_t>& h) {
        if (stage != 2) return h;
        return nn::Tensor<real_t>({h.dim(0), h.dim(1) + 1, h.dim(2)});
    };
    CHECK_THROWS_WITH_AS(a.decode_staged(z, bad), doctest::Contains("stage 2"), ShapeError);
}

TEST_CASE("reported stage channels match probed tap shapes") {
    const auto cfg = small_cfg();
    ae::Autoencoder a(cfg, 12);
    LatentGrid z(random_latent(a, 32, 13), 0);
    std::vector<int64_t> seen_channels;
    std::vector<int64_t> seen_h;
    ae::Tap probe = [&](int, const nn::Tensor<real_t>& h) {
        seen_channels.push_back(h.dim(0));
        seen_h.push_back(h.dim(1));
        return h;
    };
    a.decode_staged(z, probe);
    REQUIRE(seen_channels.size() == a.stage_channels().size());
    for (size_t i = 0; i < seen_channels.size(); ++i)
        CHECK(seen_channels[i] == a.stage_channels()[i]);
    // spatial dims follow the upsample schedule: taps at 4,8,16,32 input sizes
    CHECK(seen_h == std::vector<int64_t>{4, 8, 16, 32});
}

TEST_CASE("f=4 decoder has two taps") {
    WatermarkConfig c = small_cfg();
    c.downsample_factor = 4;
    c.stage_channels = {12, 10};
    ae::Autoencoder a(c, 14);
    CHECK(a.num_stages() == 2);
    LatentGrid z(random_latent(a, 32, 15), 0);
    CHECK(a.decode(z).values.shape() == nn::Shape{3, 32, 32});
}

TEST_CASE("checkpoint round trip preserves behaviour and manifest") {
    const auto cfg = small_cfg();
    ae::Autoencoder a(cfg, 16);
    a.save("/tmp/lm_ae_test.ckpt");
    auto b = ae::Autoencoder::load_file("/tmp/lm_ae_test.ckpt");
    CHECK(b.f() == a.f());
    CHECK(b.stage_channels() == a.stage_channels());
    CHECK(b.weights_checksum() == a.weights_checksum());
    LatentGrid z(random_latent(a, 32, 17), 0);
    ImageGrid xa = a.decode(z), xb = b.decode(z);
    for (int64_t i = 0; i < xa.values.numel(); ++i) CHECK(xa.values[i] == xb.values[i]);
}
