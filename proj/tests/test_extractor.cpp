#include <doctest.h>

#include "latentmark/core/bit_message.hpp"
#include "latentmark/extractor/extractor.hpp"

using namespace latentmark;

namespace {

ImageGrid random_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    nn::Tensor<real_t> t({3, h, w});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<real_t>(rng.uniform(-1, 1));
    return ImageGrid(std::move(t), ImageSource::attacked);
}

}  // namespace

TEST_CASE("k logits for every input resolution") {
    extractor::Extractor ext(12, 64, 1);
    for (auto [h, w] : {std::pair<int, int>{16, 16}, {37, 91}, {64, 64}, {128, 96}, {200, 16}}) {
        const auto logits = ext.extract_logits(random_image(h, w, 2));
        CHECK(logits.size() == 12);
        for (real_t v : logits) CHECK(std::isfinite(v));
    }
}

TEST_CASE("deterministic logits for identical input") {
    extractor::Extractor ext(16, 64, 3);
    ImageGrid img = random_image(64, 64, 4);
    const auto a = ext.extract_logits(img);
    const auto b = ext.extract_logits(img);
    CHECK(a == b);
}

TEST_CASE("message equals sign-thresholded logits") {
    extractor::Extractor ext(16, 64, 5);
    for (int rep = 0; rep < 5; ++rep) {
        ImageGrid img = random_image(64, 64, 6 + static_cast<uint64_t>(rep));
        const auto logits = ext.extract_logits(img);
        const BitMessage m = ext.extract_message(img);
        for (int i = 0; i < 16; ++i) CHECK(m.bit(i) == (logits[static_cast<size_t>(i)] > 0 ? 1 : 0));
    }
}

TEST_CASE("untrained extraction sits at chance level") {
    extractor::Extractor ext(16, 64, 7);
    Rng rng(8);
    int64_t correct = 0, total = 0;
    for (int i = 0; i < 500; ++i) {
        const BitMessage target = BitMessage::random(16, rng.next_u64());
        const BitMessage got = ext.extract_message(random_image(64, 64, rng.next_u64()));
        for (int b = 0; b < 16; ++b) {
            correct += got.bit(b) == target.bit(b);
            ++total;
        }
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(total);
    CHECK(acc > 0.45);
    CHECK(acc < 0.55);
}

TEST_CASE("extractor checkpoint round trip") {
    extractor::Extractor ext(16, 64, 9);
    ext.save("/tmp/lm_ext_test.ckpt", "deadbeef00000000");
    auto back = extractor::Extractor::load_file("/tmp/lm_ext_test.ckpt");
    CHECK(back.k() == 16);
    CHECK(back.input_resolution() == 64);
    ImageGrid img = random_image(48, 80, 10);
    CHECK(ext.extract_logits(img) == back.extract_logits(img));
}
