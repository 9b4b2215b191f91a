#include "latentmark/embedder/embedder.hpp"

namespace latentmark::embedder {

EmbedderStack::EmbedderStack(const ae::Autoencoder& ae, int k, int B, uint64_t init_seed)
    : ae_(&ae), k_(k), B_(B) {
    check(k >= 1, "EmbedderStack: k must be >= 1");
    check(B >= 1, "EmbedderStack: B must be >= 1");
    Rng rng(init_seed ^ 0xe3bedULL);
    const auto& ch = ae.stage_channels();
    for (int i = 0; i < ae.num_stages(); ++i)
        modules.emplace_back(i, k, B, ch[static_cast<size_t>(i)], rng);
}

nn::Tensor<real_t> EmbedderStack::make_noise_block(int stage, const BitMessage& m) const {
    check(stage >= 0 && stage < num_modules(), "make_noise_block: no module for stage " + std::to_string(stage));
    check_shape(m.k() == k_, "make_noise_block: message length " + std::to_string(m.k()) + " != k=" +
                                 std::to_string(k_));
    nn::Graph<real_t> g;
    nn::Binder<real_t> bind(g);
    auto msg = g.constant(messages_to_pm1<real_t>({m}));
    auto block = modules[static_cast<size_t>(stage)].noise_block(g, bind, msg, false);
    return from_batch(block->value);
}

LatentGrid EmbedderStack::embed_residual(int stage, const LatentGrid& z_i, const BitMessage& m) const {
    check(stage >= 0 && stage < num_modules(), "embed_residual: no module for stage " + std::to_string(stage));
    auto& mod = modules[static_cast<size_t>(stage)];
    check_shape(z_i.channels() == mod.C, "embed_residual: stage " + std::to_string(stage) + " expects " +
                                             std::to_string(mod.C) + " channels, got " +
                                             std::to_string(z_i.channels()));
    nn::Graph<real_t> g;
    nn::Binder<real_t> bind(g);
    auto msg = g.constant(messages_to_pm1<real_t>({m}));
    auto delta = modules[static_cast<size_t>(stage)].residual(g, bind, msg, z_i.height(), z_i.width(), false);
    return LatentGrid(from_batch(delta->value), stage);
}

nn::Var<real_t> EmbedderStack::decode_watermarked_batch(nn::Graph<real_t>& g, nn::Binder<real_t>& bind,
                                                        nn::Var<real_t> z, nn::Var<real_t> msg_pm,
                                                        bool trainable) const {
    ae::GraphTap<real_t> tap = [&, this](int stage, nn::Var<real_t> h) {
        auto& mod = modules[static_cast<size_t>(stage)];
        auto delta = mod.residual(g, bind, msg_pm, h->value.dim(2), h->value.dim(3), trainable);
        return nn::add(g, h, delta);
    };
    return ae_->decode_batch(g, bind, z, tap, false);
}

ImageGrid EmbedderStack::decode_watermarked(const LatentGrid& z, const BitMessage& m) const {
    nn::Graph<real_t> g;
    nn::Binder<real_t> bind(g);
    auto msg = g.constant(messages_to_pm1<real_t>({m}));
    auto out = decode_watermarked_batch(g, bind, g.constant(to_batch(z.values)), msg, false);
    return ImageGrid(from_batch(out->value), ImageSource::generated);
}

nn::Tensor<real_t> EmbedderStack::watermark_mask(const LatentGrid& z, const BitMessage& m) const {
    nn::Tensor<real_t> xw = decode_watermarked(z, m).values;
    nn::Tensor<real_t> x = ae_->decode(z).values;
    for (int64_t i = 0; i < xw.numel(); ++i) xw[i] -= x[i];
    return xw;
}

ImageGrid EmbedderStack::watermark_cover_image(const ImageGrid& x, const BitMessage& m) const {
    LatentGrid z = ae_->encode(x);
    nn::Tensor<real_t> mask = watermark_mask(z, m);
    nn::Tensor<real_t> out = x.values;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += mask[i];
    return ImageGrid(std::move(out), ImageSource::cover);  // ImageGrid clamps at the boundary
}

std::vector<nn::Param<real_t>*> EmbedderStack::params() const {
    std::vector<nn::Param<real_t>*> p;
    for (auto& m : modules)
        for (auto* q : m.params()) p.push_back(q);
    return p;
}

nn::TensorArchive EmbedderStack::to_archive() const {
    nn::TensorArchive a;
    a.manifest["format_version"] = 1;
    a.manifest["kind"] = "embedder";
    a.manifest["k"] = k_;
    a.manifest["B"] = B_;
    a.manifest["stage_channels"] = ae_->stage_channels();
    a.manifest["autoencoder_checksum"] = ae_->weights_checksum();
    nn::archive_params(a, params());
    return a;
}

void EmbedderStack::save(const std::string& path) const { to_archive().save(path); }

EmbedderStack EmbedderStack::load_file(const std::string& path, const ae::Autoencoder& ae) {
    auto a = nn::TensorArchive::load(path);
    if (a.manifest.value("kind", "") != "embedder") throw IoError(path + ": not an embedder checkpoint");
    const std::string want = a.manifest.at("autoencoder_checksum").get<std::string>();
    const std::string have = ae.weights_checksum();
    if (want != have)
        throw ValidationError("embedder checkpoint was trained against autoencoder " + want +
                              " but the loaded autoencoder has checksum " + have);
    EmbedderStack s(ae, a.manifest.at("k").get<int>(), a.manifest.at("B").get<int>(), 0);
    nn::restore_params(a, s.params());
    return s;
}

std::string EmbedderStack::weights_checksum() const { return to_archive().checksum_hex(); }

}  // namespace latentmark::embedder
