#pragma once

#include <optional>
#include <string>
#include <vector>

#include "latentmark/attacks/attacks.hpp"
#include "latentmark/data/corpus.hpp"
#include "latentmark/embedder/embedder.hpp"
#include "latentmark/extractor/extractor.hpp"
#include "latentmark/trainer/losses.hpp"

namespace latentmark::evalx {

struct EvalRow {
    std::string attack_name;
    double bit_accuracy = 0;
    std::optional<double> psnr_db;       // clean-pair metrics, reported on the
    std::optional<double> ssim_value;    // identity row
    std::optional<double> perceptual;
};

struct EvalTable {
    std::vector<EvalRow> rows;
    double mean_psnr = 0;
    double mean_ssim = 0;
    double mean_perceptual = 0;

    std::string to_tsv() const;
    void write_tsv(const std::string& path) const;
};

struct EvalOptions {
    int num_images = 64;          // held-out images from the corpus tail
    int messages_per_image = 5;   // random messages per image, accuracy averaged
    uint64_t seed = 1;
    bool post_generation = false;  // watermark cover images instead of decoding
    const ae::Autoencoder* reencode_ae = nullptr;  // consumed by reencode presets
};

// Bit accuracy per named attack over watermarked held-out images, plus
// quality metrics of the clean watermarked/original pairs.
EvalTable evaluate(const ae::Autoencoder& ae, const embedder::EmbedderStack& stack,
                   const extractor::Extractor& ext, const data::Corpus& corpus,
                   const std::vector<attacks::NamedAttack>& presets,
                   const trainer::PerceptualLoss& perceptual, const EvalOptions& opt);

}  // namespace latentmark::evalx
