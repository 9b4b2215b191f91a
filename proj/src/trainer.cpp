#include "latentmark/trainer/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "latentmark/nn/adamw.hpp"

namespace latentmark::trainer {

const std::pair<nn::Tensor<real_t>, nn::Tensor<real_t>>& LatentCache::get(int64_t i) {
    auto& slot = entries_[static_cast<size_t>(i)];
    if (!slot) {
        ImageGrid x(corpus_->get(i), ImageSource::cover);
        LatentGrid z = ae_->encode(x);
        ImageGrid xhat = ae_->decode(z);
        slot = std::make_pair(z.values, xhat.values);
    }
    return *slot;
}

namespace {

std::string fmt_float(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void save_checkpoints(const std::string& run_dir, const ae::Autoencoder& ae,
                      const embedder::EmbedderStack& stack, const extractor::Extractor& ext,
                      const Critic& critic, const WatermarkConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(run_dir);
    ae.save(run_dir + "/autoencoder.ckpt");
    stack.save(run_dir + "/embedder.ckpt");
    ext.save(run_dir + "/extractor.ckpt", stack.weights_checksum());
    critic.save(run_dir + "/critic.ckpt");
    cfg.save(run_dir + "/config.snapshot");
}

}  // namespace

TrainResult train(const ae::Autoencoder& ae, embedder::EmbedderStack& stack, extractor::Extractor& ext,
                  Critic& critic, const data::Corpus& corpus, const WatermarkConfig& cfg,
                  const TrainOptions& opt, LatentCache* shared_cache) {
    cfg.validate();
    check(corpus.size() >= cfg.batch_size, "train: corpus smaller than one batch");
    check(stack.k() == cfg.k, "train: stack k=" + std::to_string(stack.k()) + " != config k=" +
                                  std::to_string(cfg.k));
    check(ext.k() == cfg.k, "train: extractor k does not match config");

    const int64_t holdout =
        opt.holdout >= 0 ? opt.holdout : std::clamp<int64_t>(corpus.size() / 10, 1, 256);
    const int64_t train_n = corpus.size() - holdout;
    const int64_t batch = cfg.batch_size;
    const int64_t steps_per_epoch = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : train_n / batch;
    int64_t total_steps = static_cast<int64_t>(cfg.epochs) * steps_per_epoch;
    if (opt.max_steps > 0) total_steps = std::min<int64_t>(total_steps, opt.max_steps);

    LatentCache own_cache(ae, corpus);
    LatentCache& cache = shared_cache ? *shared_cache : own_cache;

    const std::string ae_checksum_before = ae.weights_checksum();

    nn::AdamW<real_t> opt_gen(cfg.learning_rate);
    nn::AdamW<real_t> opt_critic(cfg.learning_rate);

    Rng order_rng(cfg.seed ^ 0x0dedULL);
    Rng msg_rng(cfg.seed ^ 0x9e55a9e5ULL);
    Rng attack_rng(cfg.seed ^ 0xa77ac4ULL);
    Rng gp_rng(cfg.seed ^ 0x9bULL);

    PerceptualPyramid<real_t> pyramid;
    if (!cfg.perceptual_weights.empty()) pyramid.load(cfg.perceptual_weights);

    attacks::AttackSampler sampler;

    std::ofstream metrics;
    if (!opt.run_dir.empty()) {
        std::filesystem::create_directories(opt.run_dir);
        metrics.open(opt.run_dir + "/metrics.jsonl", std::ios::app);
    }

    std::vector<int64_t> order(static_cast<size_t>(train_n));
    std::iota(order.begin(), order.end(), 0);

    const int S = cfg.image_size;
    const int64_t zc = ae.latent_channels();
    const int64_t zs = S / ae.f();

    TrainResult result;
    double ema = 0;
    bool ema_init = false;
    bool saved_once = false;

    const auto lI_w = static_cast<real_t>(cfg.lambda_I);
    const auto lp_w = static_cast<real_t>(cfg.lambda_LPIPS);
    const auto la_w = static_cast<real_t>(cfg.lambda_adv);
    const auto le_w = static_cast<real_t>(cfg.lambda);

    for (int64_t step = 0; step < total_steps; ++step) {
        if (cfg.lr_schedule == "cosine") {
            const double t = static_cast<double>(step) / static_cast<double>(total_steps);
            const double lr = cfg.learning_rate * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(3.14159265358979 * t)));
            opt_gen.set_lr(lr);
            opt_critic.set_lr(lr);
        }
        if (step % steps_per_epoch == 0) {
            for (int64_t i = train_n - 1; i > 0; --i)
                std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(order_rng.uniform_int(0, i))]);
        }
        const int64_t base = (step % steps_per_epoch) * batch;

        // assemble batch from the cache; fresh random message per sample
        nn::Tensor<real_t> zb({batch, zc, zs, zs});
        nn::Tensor<real_t> xhatb({batch, 3, S, S});
        std::vector<BitMessage> msgs;
        msgs.reserve(static_cast<size_t>(batch));
        for (int64_t b = 0; b < batch; ++b) {
            const auto& [z, xhat] = cache.get(order[static_cast<size_t>((base + b) % train_n)]);
            std::copy(z.data(), z.data() + z.numel(), zb.data() + b * z.numel());
            std::copy(xhat.data(), xhat.data() + xhat.numel(), xhatb.data() + b * xhat.numel());
            msgs.push_back(BitMessage::random(cfg.k, msg_rng.next_u64()));
        }

        const bool attacks_on = sampler.active;
        const attacks::AttackSpec spec = attacks_on
                                             ? attacks::sample_attack(sampler, attack_rng)
                                             : attacks::AttackSpec{attacks::AttackKind::identity, 0, 0};

        // ----- generator step (embedder + extractor) -----
        nn::Graph<real_t> g;
        nn::Binder<real_t> bind(g);
        auto z_in = g.constant(zb);
        auto xhat_in = g.constant(xhatb);
        auto msg_pm = g.constant(embedder::messages_to_pm1<real_t>(msgs));
        auto x_w = stack.decode_watermarked_batch(g, bind, z_in, msg_pm, true);
        auto x_att = attacks::apply_attack_var(g, spec, x_w);
        auto logits = ext.forward_batch(g, bind, x_att, true);

        auto l_ext = nn::bce_with_logits(g, logits, messages_to_targets<real_t>(msgs));
        auto l_I = nn::mse_loss(g, x_w, xhat_in);
        auto l_lpips = pyramid.distance(g, x_w, xhat_in);
        auto score_w = critic.net.forward(g, bind, x_w, /*trainable=*/false);
        auto mean_w = nn::mean_all(g, score_w);
        auto l_adv_dw = nn::scale(g, mean_w, real_t(-1));
        auto l_rec = compose_rec_loss_var(g, l_I, l_lpips, l_adv_dw, lI_w, lp_w, la_w);
        auto l_total = compose_total_loss_var(g, l_rec, l_ext, le_w);

        // critic view of the clean decode, same weights (for the log only)
        auto score_clean = critic.net.forward(g, bind, xhat_in, false);
        auto mean_clean = nn::mean_all(g, score_clean);
        const double l_adv_c_value =
            static_cast<double>(mean_w->value[0]) - static_cast<double>(mean_clean->value[0]);

        if (!std::isfinite(static_cast<double>(l_total->value[0]))) {
            if (saved_once)
                throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                                         "; last-good checkpoints kept in " + opt.run_dir);
            throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
        }

        g.backward(l_total);
        opt_gen.step(bind.bound());

        // ----- critic step (1:1 with generator updates) -----
        {
            nn::Graph<real_t> gc;
            nn::Binder<real_t> bc(gc);
            auto xw_det = gc.constant(x_w->value);
            auto xh = gc.constant(xhatb);
            auto s_w = critic.net.forward(gc, bc, xw_det, true);
            auto s_c = critic.net.forward(gc, bc, xh, true);
            auto l_c = nn::sub(gc, nn::mean_all(gc, s_w), nn::mean_all(gc, s_c));
            nn::Tensor<real_t> x_int(xhatb.shape());
            for (int64_t b = 0; b < batch; ++b) {
                const auto eps = static_cast<real_t>(gp_rng.uniform());
                const real_t* a = xhatb.data() + b * 3 * S * S;
                const real_t* w = x_w->value.data() + b * 3 * S * S;
                real_t* dst = x_int.data() + b * 3 * S * S;
                for (int64_t i = 0; i < 3 * S * S; ++i) dst[i] = eps * a[i] + (real_t(1) - eps) * w[i];
            }
            auto gp = critic.net.gradient_penalty(gc, bc, x_int);
            auto critic_obj = nn::add(gc, l_c, nn::scale(gc, gp, static_cast<real_t>(cfg.gp_weight)));
            gc.backward(critic_obj);
            opt_critic.step(bc.bound());
        }

        // bit accuracy of this step's extraction (clean until attacks gate on)
        int64_t correct = 0;
        for (int64_t b = 0; b < batch; ++b)
            for (int i = 0; i < cfg.k; ++i) {
                const bool bit = logits->value.at2(b, i) > 0;
                if (bit == (msgs[static_cast<size_t>(b)].bit(i) != 0)) ++correct;
            }
        const double acc = static_cast<double>(correct) / static_cast<double>(batch * cfg.k);
        ema = ema_init ? 0.95 * ema + 0.05 * acc : acc;
        ema_init = true;
        if (!sampler.active && ema >= cfg.attack_threshold) {
            sampler.active = true;
            result.attack_activated_step = static_cast<int>(step);
            if (opt.log) (*opt.log) << "attacks active from step " << step << " (ema " << ema << ")\n";
        }

        result.last.l_I = l_I->value[0];
        result.last.l_lpips = l_lpips->value[0];
        result.last.l_adv_dw = l_adv_dw->value[0];
        result.last.l_adv_c = l_adv_c_value;
        result.last.l_ext = l_ext->value[0];
        result.last.l_rec = l_rec->value[0];
        result.last.l_total = l_total->value[0];

        if (metrics.is_open()) {
            metrics << "{\"step\":" << step << ",\"l_I\":" << fmt_float(result.last.l_I)
                    << ",\"l_lpips\":" << fmt_float(result.last.l_lpips)
                    << ",\"l_adv_dw\":" << fmt_float(result.last.l_adv_dw)
                    << ",\"l_adv_c\":" << fmt_float(result.last.l_adv_c)
                    << ",\"l_ext\":" << fmt_float(result.last.l_ext)
                    << ",\"l_total\":" << fmt_float(result.last.l_total) << ",\"bit_acc\":" << fmt_float(acc)
                    << ",\"attack_active\":" << (attacks_on ? "true" : "false") << ",\"attack\":\""
                    << attacks::kind_name(spec.kind) << "\"}\n";
        }

        if (opt.log && (step % 100 == 0 || step + 1 == total_steps))
            (*opt.log) << "step " << step << "/" << total_steps << " l_total " << result.last.l_total
                       << " l_ext " << result.last.l_ext << " bit_acc " << acc << " ema " << ema
                       << (sampler.active ? " [attacks]" : "") << "\n";

        if (!opt.run_dir.empty() && ((step + 1) % steps_per_epoch == 0 || step + 1 == total_steps)) {
            save_checkpoints(opt.run_dir, ae, stack, ext, critic, cfg);
            saved_once = true;
        }
        result.steps = static_cast<int>(step + 1);
        result.bit_acc_ema = ema;
    }

    check(ae.weights_checksum() == ae_checksum_before,
          "train: frozen autoencoder weights changed during training");
    return result;
}

}  // namespace latentmark::trainer
