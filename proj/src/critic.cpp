#include "latentmark/trainer/critic.hpp"

namespace latentmark::trainer {

double Critic::score(const ImageGrid& img) const {
    nn::Graph<real_t> g;
    nn::Binder<real_t> bind(g);
    auto s = net.forward(g, bind, g.constant(to_batch(img.values)), false);
    return s->value[0];
}

void Critic::save(const std::string& path) const {
    nn::TensorArchive a;
    a.manifest["format_version"] = 1;
    a.manifest["kind"] = "critic";
    nn::archive_params(a, net.params());
    a.save(path);
}

Critic Critic::load_file(const std::string& path) {
    auto a = nn::TensorArchive::load(path);
    if (a.manifest.value("kind", "") != "critic") throw IoError(path + ": not a critic checkpoint");
    Critic c(0);
    nn::restore_params(a, c.net.params());
    return c;
}

}  // namespace latentmark::trainer
