#include "latentmark/evalx/eval.hpp"

#include <fstream>
#include <sstream>

#include "latentmark/evalx/metrics.hpp"

namespace latentmark::evalx {

std::string EvalTable::to_tsv() const {
    std::ostringstream os;
    os << "attack\tbit_acc\tpsnr\tssim\tperceptual\n";
    os.precision(6);
    for (const auto& r : rows) {
        os << r.attack_name << "\t" << r.bit_accuracy << "\t";
        if (r.psnr_db) os << *r.psnr_db;
        os << "\t";
        if (r.ssim_value) os << *r.ssim_value;
        os << "\t";
        if (r.perceptual) os << *r.perceptual;
        os << "\n";
    }
    return os.str();
}

void EvalTable::write_tsv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write eval table: " + path);
    f << to_tsv();
}

EvalTable evaluate(const ae::Autoencoder& ae, const embedder::EmbedderStack& stack,
                   const extractor::Extractor& ext, const data::Corpus& corpus,
                   const std::vector<attacks::NamedAttack>& presets,
                   const trainer::PerceptualLoss& perceptual, const EvalOptions& opt) {
    check(opt.num_images >= 1 && opt.messages_per_image >= 1, "evaluate: counts must be positive");
    const int64_t holdout = std::clamp<int64_t>(corpus.size() / 10, 1, 256);
    const int64_t n_img = std::min<int64_t>(opt.num_images, holdout);
    const int64_t first = corpus.size() - n_img;  // tail images are never trained on
    const int k = stack.k();

    // cache latents and clean decodes for the evaluation set
    const int S = static_cast<int>(corpus.get(first).dim(1));
    const int64_t zc = ae.latent_channels(), zs = S / ae.f();
    nn::Tensor<real_t> zb({n_img, zc, zs, zs});
    nn::Tensor<real_t> xb({n_img, 3, S, S});      // cover images
    nn::Tensor<real_t> xhatb({n_img, 3, S, S});   // clean decodes
    for (int64_t i = 0; i < n_img; ++i) {
        ImageGrid x(corpus.get(first + i), ImageSource::cover);
        LatentGrid z = ae.encode(x);
        ImageGrid xhat = ae.decode(z);
        std::copy(z.values.data(), z.values.data() + z.values.numel(), zb.data() + i * z.values.numel());
        std::copy(x.values.data(), x.values.data() + x.values.numel(), xb.data() + i * x.values.numel());
        std::copy(xhat.values.data(), xhat.values.data() + xhat.values.numel(),
                  xhatb.data() + i * xhat.values.numel());
    }

    EvalTable table;
    table.rows.resize(presets.size());
    for (size_t p = 0; p < presets.size(); ++p) table.rows[p].attack_name = presets[p].name;
    std::vector<double> acc_sum(presets.size(), 0.0);
    std::vector<int64_t> acc_count(presets.size(), 0);
    double psnr_sum = 0, ssim_sum = 0, perc_sum = 0;
    int64_t pair_count = 0;

    Rng msg_rng(opt.seed ^ 0xe5a1ULL);
    for (int m = 0; m < opt.messages_per_image; ++m) {
        std::vector<BitMessage> msgs;
        msgs.reserve(static_cast<size_t>(n_img));
        for (int64_t i = 0; i < n_img; ++i) msgs.push_back(BitMessage::random(k, msg_rng.next_u64()));

        // watermarked batch
        nn::Graph<real_t> g;
        nn::Binder<real_t> bind(g);
        auto msg_pm = g.constant(embedder::messages_to_pm1<real_t>(msgs));
        auto xw_var = stack.decode_watermarked_batch(g, bind, g.constant(zb), msg_pm, false);
        nn::Tensor<real_t> xw = xw_var->value;
        if (opt.post_generation) {
            // x + D_w(z) - D(z), clamped
            for (int64_t i = 0; i < xw.numel(); ++i)
                xw[i] = std::clamp(xb[i] + xw[i] - xhatb[i], real_t(-1), real_t(1));
        }

        // clean-pair quality metrics against what each mode can observe
        const nn::Tensor<real_t>& ref = opt.post_generation ? xb : xhatb;
        for (int64_t i = 0; i < n_img; ++i) {
            nn::Tensor<real_t> a({3, S, S}), b({3, S, S});
            std::copy(xw.data() + i * a.numel(), xw.data() + (i + 1) * a.numel(), a.data());
            std::copy(ref.data() + i * b.numel(), ref.data() + (i + 1) * b.numel(), b.data());
            psnr_sum += psnr(a, b);
            ssim_sum += ssim(a, b);
            perc_sum += perceptual(ImageGrid(a, ImageSource::generated), ImageGrid(b, ImageSource::generated));
            ++pair_count;
        }

        for (size_t p = 0; p < presets.size(); ++p) {
            const auto& na = presets[p];
            nn::Graph<real_t> ga;
            nn::Tensor<real_t> attacked;
            if (na.spec.kind == attacks::AttackKind::reencode) {
                check(opt.reencode_ae != nullptr,
                      "evaluate: preset '" + na.name + "' needs --reencode-ae");
                check(static_cast<int>(std::llround(na.spec.parameter)) == opt.reencode_ae->f(),
                      "evaluate: reencode preset f does not match the attacking autoencoder");
                nn::Binder<real_t> ba(ga);
                auto z2 = opt.reencode_ae->encode_batch(ga, ba, ga.constant(xw), false);
                attacked = opt.reencode_ae->decode_batch(ga, ba, z2, nullptr, false)->value;
            } else {
                attacks::AttackSpec spec = na.spec;
                spec.seed ^= opt.seed + static_cast<uint64_t>(m) * 1315423911ULL;
                attacked = attacks::apply_attack_var(ga, spec, ga.constant(xw))->value;
            }
            nn::Graph<real_t> ge;
            nn::Binder<real_t> be(ge);
            auto logits = ext.forward_batch(ge, be, ge.constant(attacked), false);
            for (int64_t i = 0; i < n_img; ++i)
                for (int bix = 0; bix < k; ++bix) {
                    const bool bit = logits->value.at2(i, bix) > 0;
                    if (bit == (msgs[static_cast<size_t>(i)].bit(bix) != 0)) ++acc_sum[p];
                }
            acc_count[p] += n_img * k;
        }
    }

    for (size_t p = 0; p < presets.size(); ++p) {
        table.rows[p].bit_accuracy = acc_sum[p] / static_cast<double>(acc_count[p]);
        if (presets[p].spec.kind == attacks::AttackKind::identity) {
            table.rows[p].psnr_db = psnr_sum / static_cast<double>(pair_count);
            table.rows[p].ssim_value = ssim_sum / static_cast<double>(pair_count);
            table.rows[p].perceptual = perc_sum / static_cast<double>(pair_count);
        }
    }
    table.mean_psnr = psnr_sum / static_cast<double>(pair_count);
    table.mean_ssim = ssim_sum / static_cast<double>(pair_count);
    table.mean_perceptual = perc_sum / static_cast<double>(pair_count);
    return table;
}

}  // namespace latentmark::evalx
