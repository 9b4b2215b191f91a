#include "latentmark/ae/autoencoder.hpp"

#include <algorithm>
#include <numeric>

#include "latentmark/evalx/metrics.hpp"
#include "latentmark/nn/adamw.hpp"

namespace latentmark::ae {

Autoencoder::Autoencoder(const WatermarkConfig& cfg, uint64_t init_seed)
    : f_(cfg.downsample_factor), latent_channels_(cfg.latent_channels) {
    cfg.validate();
    Rng rng(init_seed);
    encoder = EncoderNet<real_t>(f_, latent_channels_, rng);
    decoder = DecoderNet<real_t>(f_, cfg.stage_channels, latent_channels_, rng);
}

nn::Var<real_t> Autoencoder::encode_batch(nn::Graph<real_t>& g, nn::Binder<real_t>& bind,
                                          nn::Var<real_t> x, bool trainable) const {
    check_shape(x->value.dim(2) % f_ == 0 && x->value.dim(3) % f_ == 0,
                "encode: resolution " + std::to_string(x->value.dim(2)) + "x" +
                    std::to_string(x->value.dim(3)) + " not divisible by f=" + std::to_string(f_));
    return encoder.forward(g, bind, x, trainable);
}

nn::Var<real_t> Autoencoder::decode_batch(nn::Graph<real_t>& g, nn::Binder<real_t>& bind,
                                          nn::Var<real_t> z, const GraphTap<real_t>& tap,
                                          bool trainable) const {
    return decoder.forward(g, bind, z, tap, trainable);
}

LatentGrid Autoencoder::encode(const ImageGrid& x) const {
    nn::Graph<real_t> g;
    nn::Binder<real_t> bind(g);
    auto out = encode_batch(g, bind, g.constant(to_batch(x.values)), false);
    return LatentGrid(from_batch(out->value), 0);
}

ImageGrid Autoencoder::decode(const LatentGrid& z) const {
    nn::Graph<real_t> g;
    nn::Binder<real_t> bind(g);
    auto out = decode_batch(g, bind, g.constant(to_batch(z.values)), nullptr, false);
    return ImageGrid(from_batch(out->value), ImageSource::generated);
}

ImageGrid Autoencoder::decode_staged(const LatentGrid& z, const Tap& taps) const {
    nn::Graph<real_t> g;
    nn::Binder<real_t> bind(g);
    GraphTap<real_t> gtap = nullptr;
    if (taps)
        gtap = [&](int stage, nn::Var<real_t> h) {
            nn::Tensor<real_t> replaced = taps(stage, from_batch(h->value));
            return g.constant(to_batch(replaced));
        };
    auto out = decode_batch(g, bind, g.constant(to_batch(z.values)), gtap, false);
    return ImageGrid(from_batch(out->value), ImageSource::generated);
}

double Autoencoder::pretrain(const data::Corpus& corpus, const WatermarkConfig& cfg, std::ostream* log) {
    check(corpus.size() >= 2, "pretrain: corpus must hold at least 2 images");
    const int64_t holdout = std::clamp<int64_t>(corpus.size() / 10, 1, 256);
    const int64_t train_n = corpus.size() - holdout;
    const int64_t batch = cfg.batch_size;
    const int S = cfg.image_size;

    nn::AdamW<real_t> opt(cfg.ae_learning_rate, 1e-4);
    Rng order_rng(cfg.seed ^ 0xae0001ULL);
    std::vector<int64_t> order(static_cast<size_t>(train_n));
    std::iota(order.begin(), order.end(), 0);

    auto enc_params = encoder.params();
    auto dec_params = decoder.params();

    for (int epoch = 0; epoch < cfg.ae_epochs; ++epoch) {
        // Fisher-Yates with the run RNG keeps the schedule reproducible
        for (int64_t i = train_n - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(order_rng.uniform_int(0, i))]);
        double epoch_loss = 0;
        int64_t steps = 0;
        for (int64_t start = 0; start + batch <= train_n; start += batch) {
            nn::Tensor<real_t> x({batch, 3, S, S});
            for (int64_t b = 0; b < batch; ++b) {
                auto img = corpus.get(order[static_cast<size_t>(start + b)]);
                std::copy(img.data(), img.data() + img.numel(), x.data() + b * img.numel());
            }
            nn::Graph<real_t> g;
            nn::Binder<real_t> bind(g);
            auto xin = g.constant(x);
            auto z = encode_batch(g, bind, xin, true);
            auto xr = decode_batch(g, bind, z, nullptr, true);
            auto loss = nn::mse_loss(g, xr, xin);
            const double lv = loss->value[0];
            if (!std::isfinite(lv))
                throw std::runtime_error("pretrain: non-finite loss at epoch " + std::to_string(epoch) +
                                         " step " + std::to_string(steps));
            g.backward(loss);
            opt.step(bind.bound());
            epoch_loss += lv;
            ++steps;
        }
        if (log)
            (*log) << "ae epoch " << epoch << " train_mse " << (epoch_loss / std::max<int64_t>(1, steps))
                   << "\n";
    }

    // held-out PSNR
    double sum_psnr = 0;
    for (int64_t i = 0; i < holdout; ++i) {
        ImageGrid x(corpus.get(train_n + i), ImageSource::cover);
        ImageGrid xr = decode(encode(x));
        sum_psnr += evalx::psnr(xr, x);
    }
    const double held = sum_psnr / static_cast<double>(holdout);
    if (log) (*log) << "ae holdout_psnr " << held << "\n";
    return held;
}

nn::TensorArchive Autoencoder::to_archive() const {
    nn::TensorArchive a;
    a.manifest["format_version"] = 1;
    a.manifest["kind"] = "autoencoder";
    a.manifest["f"] = f_;
    a.manifest["latent_channels"] = latent_channels_;
    a.manifest["stage_channels"] = decoder.stage_channels;
    a.manifest["normalization"] = "[-1,1]";
    nn::archive_params(a, encoder.params());
    nn::archive_params(a, decoder.params());
    return a;
}

void Autoencoder::save(const std::string& path) const { to_archive().save(path); }

Autoencoder Autoencoder::load_file(const std::string& path) {
    auto a = nn::TensorArchive::load(path);
    if (a.manifest.value("kind", "") != "autoencoder")
        throw IoError(path + ": not an autoencoder checkpoint");
    WatermarkConfig cfg;
    cfg.downsample_factor = a.manifest.at("f").get<int>();
    cfg.latent_channels = a.manifest.at("latent_channels").get<int>();
    cfg.stage_channels = a.manifest.at("stage_channels").get<std::vector<int>>();
    Autoencoder ae(cfg, 0);
    nn::restore_params(a, ae.encoder.params());
    nn::restore_params(a, ae.decoder.params());
    return ae;
}

std::string Autoencoder::weights_checksum() const { return to_archive().checksum_hex(); }

}  // namespace latentmark::ae
