#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace latentmark {

// Shared configuration for training and evaluation. Serialized as a flat
// key = value document; keys match the field names below.
struct WatermarkConfig {
    int k = 48;                 // message length in bits
    int B = 8;                  // noise block spatial size
    std::vector<int> stage_channels = {32, 32, 24, 16};
    int downsample_factor = 8;  // f
    int latent_channels = 4;
    int image_size = 64;

    double lambda_I = 0.1;
    double lambda_LPIPS = 1.0;
    double lambda_adv = 1.0;
    double lambda = 2.0;

    double learning_rate = 6e-5;
    std::string lr_schedule = "constant";  // constant | cosine (decays to 10%)
    int epochs = 40;
    int batch_size = 8;
    int steps_per_epoch = 0;    // 0: derive from corpus size
    double attack_threshold = 0.75;
    uint64_t seed = 0;

    // reference-autoencoder pretraining (artifact plumbing)
    double ae_learning_rate = 1e-3;
    int ae_epochs = 8;

    double gp_weight = 10.0;
    int corpus_size = 6000;
    std::string perceptual_weights;  // optional checkpoint with pyramid weights

    void validate() const;

    static WatermarkConfig load(const std::string& path);
    void save(const std::string& path) const;
    std::string dump() const;

    // number of decoder taps: log2(f) upsampling stages plus any extra
    // full-resolution stages declared by stage_channels
    int num_stages() const { return static_cast<int>(stage_channels.size()); }
    int num_upsample_stages() const;
};

}  // namespace latentmark
