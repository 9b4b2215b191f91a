#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "latentmark/trainer/trainer.hpp"

using namespace latentmark;

namespace {

WatermarkConfig tiny_cfg() {
    WatermarkConfig c;
    c.k = 8;
    c.B = 4;
    c.image_size = 32;
    c.stage_channels = {12, 10, 8, 6};
    c.downsample_factor = 8;
    c.corpus_size = 64;
    c.batch_size = 4;
    c.epochs = 1;
    c.steps_per_epoch = 4;
    c.learning_rate = 1e-3;
    return c;
}

std::vector<nlohmann::json> read_metrics(const std::string& dir) {
    std::ifstream f(dir + "/metrics.jsonl");
    REQUIRE(f.good());
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

}  // namespace

TEST_CASE("step-0 losses are forced by the zero-init identity") {
    const auto cfg = tiny_cfg();
    data::SyntheticCorpus corpus(cfg.corpus_size, cfg.image_size, 1);
    ae::Autoencoder ae(cfg, 2);
    embedder::EmbedderStack stack(ae, cfg.k, cfg.B, 3);
    extractor::Extractor ext(cfg.k, cfg.image_size, 4);
    trainer::Critic critic(5);

    trainer::TrainOptions opt;
    opt.run_dir = "/tmp/lm_train_step0";
    std::filesystem::remove_all(opt.run_dir);
    opt.max_steps = 1;
    trainer::train(ae, stack, ext, critic, corpus, cfg, opt);

    const auto rows = read_metrics(opt.run_dir);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].at("l_I").get<double>() == 0.0);
    CHECK(rows[0].at("l_lpips").get<double>() == 0.0);
    // untrained extractor with near-symmetric logits: about ln 2 per bit
    CHECK(rows[0].at("l_ext").get<double>() == doctest::Approx(std::log(2.0)).epsilon(0.08));
    CHECK(rows[0].at("attack_active").get<bool>() == false);
    CHECK(rows[0].at("attack").get<std::string>() == "identity");
}

TEST_CASE("logged loss composition identities hold exactly") {
    const auto cfg = tiny_cfg();
    data::SyntheticCorpus corpus(cfg.corpus_size, cfg.image_size, 6);
    ae::Autoencoder ae(cfg, 7);
    embedder::EmbedderStack stack(ae, cfg.k, cfg.B, 8);
    extractor::Extractor ext(cfg.k, cfg.image_size, 9);
    trainer::Critic critic(10);

    trainer::TrainOptions opt;
    opt.run_dir = "/tmp/lm_train_compose";
    std::filesystem::remove_all(opt.run_dir);
    opt.max_steps = 6;
    trainer::train(ae, stack, ext, critic, corpus, cfg, opt);

    for (const auto& row : read_metrics(opt.run_dir)) {
        const auto li = row.at("l_I").get<real_t>();
        const auto lp = row.at("l_lpips").get<real_t>();
        const auto la = row.at("l_adv_dw").get<real_t>();
        const auto le = row.at("l_ext").get<real_t>();
        const real_t rec = trainer::compose_rec_loss(li, lp, la, static_cast<real_t>(cfg.lambda_I),
                                                     static_cast<real_t>(cfg.lambda_LPIPS),
                                                     static_cast<real_t>(cfg.lambda_adv));
        const real_t total = trainer::compose_total_loss(rec, le, static_cast<real_t>(cfg.lambda));
        CHECK(row.at("l_total").get<real_t>() == total);
    }
}

TEST_CASE("frozen autoencoder checksum is unchanged by training") {
    const auto cfg = tiny_cfg();
    data::SyntheticCorpus corpus(cfg.corpus_size, cfg.image_size, 11);
    ae::Autoencoder ae(cfg, 12);
    const std::string before = ae.weights_checksum();
    embedder::EmbedderStack stack(ae, cfg.k, cfg.B, 13);
    extractor::Extractor ext(cfg.k, cfg.image_size, 14);
    trainer::Critic critic(15);
    trainer::TrainOptions opt;
    opt.max_steps = 8;
    trainer::train(ae, stack, ext, critic, corpus, cfg, opt);  // also checks internally
    CHECK(ae.weights_checksum() == before);
}

TEST_CASE("no non-identity attack is logged before the threshold is crossed") {
    auto cfg = tiny_cfg();
    cfg.attack_threshold = 0.75;
    cfg.steps_per_epoch = 10;
    cfg.epochs = 3;
    data::SyntheticCorpus corpus(cfg.corpus_size, cfg.image_size, 16);
    ae::Autoencoder ae(cfg, 17);
    embedder::EmbedderStack stack(ae, cfg.k, cfg.B, 18);
    extractor::Extractor ext(cfg.k, cfg.image_size, 19);
    trainer::Critic critic(20);
    trainer::TrainOptions opt;
    opt.run_dir = "/tmp/lm_train_gate";
    std::filesystem::remove_all(opt.run_dir);
    const auto res = trainer::train(ae, stack, ext, critic, corpus, cfg, opt);

    bool seen_active = false;
    for (const auto& row : read_metrics(opt.run_dir)) {
        const bool active = row.at("attack_active").get<bool>();
        if (!active) {
            CHECK_FALSE(seen_active);  // latched once on
            CHECK(row.at("attack").get<std::string>() == "identity");
        } else {
            seen_active = true;
        }
    }
    if (res.attack_activated_step < 0) CHECK_FALSE(seen_active);
}

TEST_CASE("training runs are reproducible under a fixed seed") {
    auto cfg = tiny_cfg();
    cfg.seed = 42;
    auto run = [&](const std::string& dir) {
        std::filesystem::remove_all(dir);
        data::SyntheticCorpus corpus(cfg.corpus_size, cfg.image_size, 21);
        ae::Autoencoder ae(cfg, 22);
        embedder::EmbedderStack stack(ae, cfg.k, cfg.B, 23);
        extractor::Extractor ext(cfg.k, cfg.image_size, 24);
        trainer::Critic critic(25);
        trainer::TrainOptions opt;
        opt.run_dir = dir;
        opt.max_steps = 5;
        trainer::train(ae, stack, ext, critic, corpus, cfg, opt);
        std::ifstream f(dir + "/metrics.jsonl");
        return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    };
    CHECK(run("/tmp/lm_train_rep1") == run("/tmp/lm_train_rep2"));
}

TEST_CASE("gradient penalty gradients match finite differences") {
    Rng rng(26);
    trainer::CriticNet<double> critic(rng);
    nn::Tensor<double> x({2, 3, 16, 16});
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1, 1);

    nn::Graph<double> g;
    nn::Binder<double> bind(g);
    auto gp = critic.gradient_penalty(g, bind, x);
    g.backward(gp);

    auto eval = [&]() {
        nn::Graph<double> g2;
        nn::Binder<double> b2(g2);
        return critic.gradient_penalty(g2, b2, x)->value[0];
    };

    const double h = 1e-6;
    int checked = 0;
    for (auto& [p, v] : bind.bound()) {
        for (int64_t i = 0; i < std::min<int64_t>(p->value.numel(), 6); ++i) {
            const double keep = p->value[i];
            p->value[i] = keep + h;
            const double up = eval();
            p->value[i] = keep - h;
            const double dn = eval();
            p->value[i] = keep;
            const double fd = (up - dn) / (2 * h);
            const double an = v->has_grad() ? v->grad[i] : 0.0;
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            INFO(p->name << "[" << i << "] fd " << fd << " analytic " << an);
            CHECK(std::abs(fd - an) / denom < 1e-3);
            ++checked;
        }
    }
    CHECK(checked >= 20);
}
