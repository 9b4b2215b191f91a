#include "latentmark/extractor/extractor.hpp"

namespace latentmark::extractor {

Extractor::Extractor(int k, int R, uint64_t init_seed) {
    check(k >= 1, "Extractor: k must be >= 1");
    check(R >= 16, "Extractor: input resolution must be >= 16");
    Rng rng(init_seed ^ 0xe27ac7ULL);
    net = ExtractorNet<real_t>(k, R, rng);
}

nn::Var<real_t> Extractor::forward_batch(nn::Graph<real_t>& g, nn::Binder<real_t>& bind,
                                         nn::Var<real_t> x, bool trainable) const {
    return net.forward(g, bind, x, trainable);
}

std::vector<real_t> Extractor::extract_logits(const ImageGrid& img) const {
    nn::Graph<real_t> g;
    nn::Binder<real_t> bind(g);
    auto out = net.forward(g, bind, g.constant(to_batch(img.values)), false);
    std::vector<real_t> logits(static_cast<size_t>(net.k));
    for (int i = 0; i < net.k; ++i) logits[static_cast<size_t>(i)] = out->value[i];
    return logits;
}

BitMessage Extractor::extract_message(const ImageGrid& img) const {
    const auto logits = extract_logits(img);
    std::vector<uint8_t> bits(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) bits[i] = logits[i] > 0 ? 1 : 0;
    return BitMessage(std::move(bits));
}

void Extractor::save(const std::string& path, const std::string& embedder_checksum) const {
    nn::TensorArchive a;
    a.manifest["format_version"] = 1;
    a.manifest["kind"] = "extractor";
    a.manifest["k"] = net.k;
    a.manifest["R"] = net.R;
    a.manifest["backbone"] = "resize8conv";
    a.manifest["embedder_checksum"] = embedder_checksum;
    nn::archive_params(a, net.params());
    a.save(path);
}

Extractor Extractor::load_file(const std::string& path) {
    auto a = nn::TensorArchive::load(path);
    if (a.manifest.value("kind", "") != "extractor") throw IoError(path + ": not an extractor checkpoint");
    Extractor e(a.manifest.at("k").get<int>(), a.manifest.at("R").get<int>(), 0);
    nn::restore_params(a, e.net.params());
    return e;
}

}  // namespace latentmark::extractor
