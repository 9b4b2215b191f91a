#include <doctest.h>

#include <fstream>
#include <map>

#include "latentmark/attacks/attacks.hpp"

using namespace latentmark;
using attacks::AttackKind;
using attacks::AttackSpec;

namespace {

ImageGrid test_image(int S, uint64_t seed) {
    Rng rng(seed);
    nn::Tensor<real_t> t({3, S, S});
    // smooth content plus texture so jpeg and blur have something to chew on
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < S; ++y)
            for (int64_t x = 0; x < S; ++x)
                t.at3(c, y, x) = static_cast<real_t>(
                    0.5 * std::sin(0.3 * static_cast<double>(x) + static_cast<double>(c)) +
                    0.3 * std::cos(0.21 * static_cast<double>(y)) + 0.1 * rng.uniform(-1, 1));
    return ImageGrid(std::move(t), ImageSource::generated);
}

}  // namespace

TEST_CASE("identity and neutral parameters leave the image unchanged") {
    ImageGrid img = test_image(64, 1);
    ImageGrid id = attacks::apply_attack({AttackKind::identity, 0, 0}, img);
    for (int64_t i = 0; i < img.values.numel(); ++i) CHECK(id.values[i] == img.values[i]);

    ImageGrid b1 = attacks::apply_attack({AttackKind::brightness, 1.0, 0}, img);
    for (int64_t i = 0; i < img.values.numel(); ++i)
        CHECK(b1.values[i] == doctest::Approx(img.values[i]).epsilon(1e-6));

    ImageGrid c1 = attacks::apply_attack({AttackKind::contrast, 1.0, 0}, img);
    for (int64_t i = 0; i < img.values.numel(); ++i)
        CHECK(c1.values[i] == doctest::Approx(img.values[i]).epsilon(1e-6));
}

TEST_CASE("parameters outside the legal ranges are rejected") {
    const struct {
        AttackKind kind;
        double low_bad, high_bad, ok;
    } cases[] = {
        {AttackKind::center_crop, 0.05, 0.96, 0.5},
        {AttackKind::random_crop, 0.0, 1.2, 0.3},
        {AttackKind::rotation, 1.0, 50.0, 15.0},
        {AttackKind::resize, 0.4, 1.6, 1.2},
        {AttackKind::brightness, -0.1, 3.4, 2.0},
        {AttackKind::contrast, -1.0, 3.1, 0.5},
        {AttackKind::gaussian_noise, -0.01, 0.06, 0.03},
        {AttackKind::blur, 1, 21, 11},
        {AttackKind::jpeg, 30, 101, 70},
    };
    ImageGrid img = test_image(32, 2);
    for (const auto& c : cases) {
        CHECK_THROWS_AS(attacks::apply_attack({c.kind, c.low_bad, 0}, img), ValidationError);
        CHECK_THROWS_AS(attacks::apply_attack({c.kind, c.high_bad, 0}, img), ValidationError);
        CHECK_NOTHROW(attacks::apply_attack({c.kind, c.ok, 0}, img));
    }
    // blur kernels must be odd
    CHECK_THROWS_AS(attacks::apply_attack({AttackKind::blur, 8, 0}, img), ValidationError);
    // fuzz around the boundaries
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        const double p = rng.uniform(0.951, 10.0);
        CHECK_THROWS_AS(attacks::validate_attack({AttackKind::center_crop, p, 0}), ValidationError);
        CHECK_THROWS_AS(attacks::validate_attack({AttackKind::gaussian_noise, rng.uniform(0.0501, 1.0), 0}),
                        ValidationError);
    }
}

TEST_CASE("center crop geometry: retained side fraction is sqrt(area)") {
    const auto r = attacks::crop_rect({AttackKind::center_crop, 0.25, 0}, 64, 64);
    CHECK(r.h == 32);
    CHECK(r.w == 32);
    CHECK(r.y0 == 16);
    CHECK(r.x0 == 16);
    for (double area : {0.08, 0.4, 0.71, 0.95}) {
        const auto rr = attacks::crop_rect({AttackKind::center_crop, area, 0}, 64, 64);
        CHECK(std::abs(static_cast<double>(rr.h) - std::sqrt(area) * 64.0) <= 1.0);
    }
    // cropped content matches direct index slicing of the central window
    ImageGrid img = test_image(64, 4);
    nn::Graph<real_t> g;
    auto sliced = nn::slice_spatial(g, g.constant(to_batch(img.values)), 16, 16, 32, 32);
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < 32; ++y)
            for (int64_t x = 0; x < 32; ++x)
                CHECK(sliced->value.at4(0, c, y, x) == img.values.at3(c, y + 16, x + 16));
}

TEST_CASE("sampled attacks: uniform kinds, parameters in range, deterministic") {
    attacks::AttackSampler sampler;
    Rng inactive_rng(0);
    CHECK_THROWS_AS(attacks::sample_attack(sampler, inactive_rng), ValidationError);  // inactive
    sampler.active = true;

    Rng rng(5);
    std::map<std::string, int> freq;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const AttackSpec s = attacks::sample_attack(sampler, rng);
        ++freq[attacks::kind_name(s.kind)];
        CHECK_NOTHROW(attacks::validate_attack(s));
        if (s.kind == AttackKind::rotation) {
            CHECK(std::abs(s.parameter) >= 2.0);
            CHECK(std::abs(s.parameter) <= 46.0);
        }
    }
    CHECK(freq.size() == 10);
    for (const auto& [name, count] : freq) {
        const double f = static_cast<double>(count) / draws;
        INFO(name << " frequency " << f);
        CHECK(f > 0.07);
        CHECK(f < 0.13);
    }

    Rng r1(9), r2(9);
    for (int i = 0; i < 100; ++i) {
        const auto a = attacks::sample_attack(sampler, r1);
        const auto b = attacks::sample_attack(sampler, r2);
        CHECK(a.kind == b.kind);
        CHECK(a.parameter == b.parameter);
        CHECK(a.seed == b.seed);
    }
}

TEST_CASE("attack application is deterministic given (spec, seed)") {
    ImageGrid img = test_image(64, 6);
    for (AttackSpec s : {AttackSpec{AttackKind::random_crop, 0.4, 77}, AttackSpec{AttackKind::gaussian_noise, 0.03, 5},
                         AttackSpec{AttackKind::jpeg, 70, 0}, AttackSpec{AttackKind::rotation, -25, 0}}) {
        ImageGrid a = attacks::apply_attack(s, img);
        ImageGrid b = attacks::apply_attack(s, img);
        REQUIRE(a.values.numel() == b.values.numel());
        for (int64_t i = 0; i < a.values.numel(); ++i) CHECK(a.values[i] == b.values[i]);
    }
}

TEST_CASE("every training attack passes gradient through to the input") {
    const double mid_params[] = {0.5, 0.5, 24.0, 1.0, 1.5, 1.5, 0.025, 11.0, 70.0, 0.0};
    for (size_t ki = 0; ki < std::size(attacks::kTrainingKinds); ++ki) {
        const AttackSpec spec{attacks::kTrainingKinds[ki], mid_params[ki], 3};
        nn::Graph<real_t> g;
        ImageGrid img = test_image(32, 7 + ki);
        auto x = g.leaf(to_batch(img.values), true);
        auto y = attacks::apply_attack_var(g, spec, x);
        auto loss = nn::mean_all(g, nn::square(g, y));
        g.backward(loss);
        REQUIRE(x->has_grad());
        double norm = 0;
        for (int64_t i = 0; i < x->grad.numel(); ++i) norm += static_cast<double>(x->grad[i]) * x->grad[i];
        INFO("attack " << attacks::kind_name(spec.kind));
        CHECK(norm > 0);
    }
}

TEST_CASE("jpeg is lossy: combined differs from its jpeg-free variant") {
    ImageGrid img = test_image(64, 8);
    ImageGrid comb = attacks::combined_attack(img);
    // crop -> brightness only
    ImageGrid cropped = attacks::apply_attack({AttackKind::center_crop, 0.40, 0}, img);
    ImageGrid bright = attacks::apply_attack({AttackKind::brightness, 2.0, 0}, cropped);
    REQUIRE(comb.values.numel() == bright.values.numel());
    real_t diff = 0;
    for (int64_t i = 0; i < comb.values.numel(); ++i)
        diff = std::max(diff, std::abs(comb.values[i] - bright.values[i]));
    CHECK(diff > 0);

    // and the combined output keeps the original resolution (crop resizes back)
    CHECK(comb.values.shape() == img.values.shape());
}

TEST_CASE("resize changes the raster dimensions by sqrt(area)") {
    ImageGrid img = test_image(64, 9);
    ImageGrid small = attacks::apply_attack({AttackKind::resize, 0.5, 0}, img);
    CHECK(small.values.dim(1) == std::llround(std::sqrt(0.5) * 64));
    ImageGrid big = attacks::apply_attack({AttackKind::resize, 1.5, 0}, img);
    CHECK(big.values.dim(1) == std::llround(std::sqrt(1.5) * 64));
}

TEST_CASE("attack preset files parse, validate and round trip") {
    const auto presets = attacks::default_attack_presets();
    attacks::write_attack_presets("/tmp/lm_presets_test.tsv", presets);
    const auto back = attacks::parse_attack_presets("/tmp/lm_presets_test.tsv");
    REQUIRE(back.size() == presets.size());
    for (size_t i = 0; i < presets.size(); ++i) {
        CHECK(back[i].name == presets[i].name);
        CHECK(back[i].spec.kind == presets[i].spec.kind);
        CHECK(back[i].spec.parameter == presets[i].spec.parameter);
    }
    std::ofstream bad("/tmp/lm_presets_bad.tsv");
    bad << "Over the top\tcenter_crop\t0.99\n";
    bad.close();
    CHECK_THROWS_AS(attacks::parse_attack_presets("/tmp/lm_presets_bad.tsv"), ValidationError);
}
