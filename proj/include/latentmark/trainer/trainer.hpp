#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "latentmark/attacks/attacks.hpp"
#include "latentmark/core/config.hpp"
#include "latentmark/data/corpus.hpp"
#include "latentmark/embedder/embedder.hpp"
#include "latentmark/extractor/extractor.hpp"
#include "latentmark/trainer/losses.hpp"

namespace latentmark::trainer {

// Memoized (z, decoded clean image) pairs for a frozen autoencoder over a
// fixed corpus. Shareable across runs that use the same autoencoder.
class LatentCache {
public:
    LatentCache(const ae::Autoencoder& ae, const data::Corpus& corpus)
        : ae_(&ae), corpus_(&corpus), entries_(static_cast<size_t>(corpus.size())) {}

    const std::pair<nn::Tensor<real_t>, nn::Tensor<real_t>>& get(int64_t i);

private:
    const ae::Autoencoder* ae_;
    const data::Corpus* corpus_;
    std::vector<std::optional<std::pair<nn::Tensor<real_t>, nn::Tensor<real_t>>>> entries_;
};

struct TrainOptions {
    std::string run_dir;          // when set: metrics.jsonl + per-epoch checkpoints
    std::ostream* log = nullptr;  // progress lines
    int max_steps = 0;            // 0: cfg.epochs * steps_per_epoch
    int64_t holdout = -1;         // images reserved from the corpus tail (-1: auto)
};

struct TrainResult {
    int steps = 0;
    double bit_acc_ema = 0;
    int attack_activated_step = -1;
    LossBreakdown last;
};

// Joint optimization of the embedding stack and extractor against the frozen
// autoencoder, with the critic updated 1:1. Attacks activate once the running
// bit accuracy first reaches cfg.attack_threshold and stay active.
TrainResult train(const ae::Autoencoder& ae, embedder::EmbedderStack& stack, extractor::Extractor& ext,
                  Critic& critic, const data::Corpus& corpus, const WatermarkConfig& cfg,
                  const TrainOptions& opt, LatentCache* shared_cache = nullptr);

}  // namespace latentmark::trainer
