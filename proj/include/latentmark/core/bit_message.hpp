#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace latentmark {

// Fixed-length binary watermark message. Hex serialization is big-endian
// within each digit; when k is not a multiple of 4 the trailing pad bits are
// written as zero and ignored on parse.
class BitMessage {
public:
    BitMessage() = default;
    explicit BitMessage(std::vector<uint8_t> bits);

    static BitMessage from_hex(const std::string& hex, int k);
    static BitMessage random(int k, uint64_t seed);

    std::string to_hex() const;

    int k() const { return static_cast<int>(bits_.size()); }
    const std::vector<uint8_t>& bits() const { return bits_; }
    uint8_t bit(int i) const { return bits_[static_cast<size_t>(i)]; }

    // low 64 bits packed, bit 0 of the message in the MSB-first order
    uint64_t packed64() const;

    BitMessage complement() const;

    bool operator==(const BitMessage& o) const { return bits_ == o.bits_; }
    bool operator!=(const BitMessage& o) const { return bits_ != o.bits_; }

private:
    std::vector<uint8_t> bits_;
};

BitMessage message_from_hex(const std::string& hex, int k);
BitMessage random_message(int k, uint64_t seed);

}  // namespace latentmark
