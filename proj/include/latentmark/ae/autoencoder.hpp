#pragma once

#include <functional>
#include <ostream>
#include <string>

#include "latentmark/ae/nets.hpp"
#include "latentmark/core/config.hpp"
#include "latentmark/core/grids.hpp"
#include "latentmark/data/corpus.hpp"
#include "latentmark/nn/checkpoint.hpp"

namespace latentmark::ae {

// Per-stage tap over plain tensors: (stage_index, z_i) -> replacement of
// identical shape.
using Tap = std::function<nn::Tensor<real_t>(int, const nn::Tensor<real_t>&)>;

// Frozen encoder E and staged decoder D, plus desk-scale pretraining of the
// reference weights. After loading/pretraining the nets are treated as
// read-only; watermark training binds them as frozen leaves.
class Autoencoder {
public:
    Autoencoder(const WatermarkConfig& cfg, uint64_t init_seed);

    int f() const { return f_; }
    int latent_channels() const { return latent_channels_; }
    int num_stages() const { return decoder.num_stages(); }
    const std::vector<int>& stage_channels() const { return decoder.stage_channels; }
    const std::vector<int>& upsample_schedule() const { return decoder.upsample_schedule; }

    LatentGrid encode(const ImageGrid& x) const;
    ImageGrid decode(const LatentGrid& z) const;
    ImageGrid decode_staged(const LatentGrid& z, const Tap& taps) const;

    // graph-level entry points for the trainer (x, z batched NCHW)
    nn::Var<real_t> encode_batch(nn::Graph<real_t>& g, nn::Binder<real_t>& bind, nn::Var<real_t> x,
                                 bool trainable) const;
    nn::Var<real_t> decode_batch(nn::Graph<real_t>& g, nn::Binder<real_t>& bind, nn::Var<real_t> z,
                                 const GraphTap<real_t>& tap, bool trainable) const;

    // Trains encoder+decoder on reconstruction MSE; returns held-out PSNR.
    double pretrain(const data::Corpus& corpus, const WatermarkConfig& cfg, std::ostream* log);

    void save(const std::string& path) const;
    static Autoencoder load_file(const std::string& path);

    std::string weights_checksum() const;

    mutable EncoderNet<real_t> encoder;
    mutable DecoderNet<real_t> decoder;

private:
    Autoencoder() = default;
    nn::TensorArchive to_archive() const;

    int f_ = 8;
    int latent_channels_ = 4;
};

}  // namespace latentmark::ae
