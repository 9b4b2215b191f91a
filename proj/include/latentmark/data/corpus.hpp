#pragma once

#include <memory>
#include <vector>

#include "latentmark/core/grids.hpp"

namespace latentmark::data {

// Source of training images. Implementations must be deterministic: get(i)
// always returns the same image.
class Corpus {
public:
    virtual ~Corpus() = default;
    virtual int64_t size() const = 0;
    virtual nn::Tensor<real_t> get(int64_t index) const = 0;  // (3,H,W) in [-1,1]
};

// Procedurally generated images: layered gradients, sinusoid textures and
// soft-edged shapes. Stands in for a photo corpus at desk scale.
class SyntheticCorpus final : public Corpus {
public:
    SyntheticCorpus(int64_t count, int image_size, uint64_t seed);

    int64_t size() const override { return count_; }
    nn::Tensor<real_t> get(int64_t index) const override;

private:
    int64_t count_;
    int size_;
    uint64_t seed_;
};

}  // namespace latentmark::data
