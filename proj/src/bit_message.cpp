#include "latentmark/core/bit_message.hpp"

#include "latentmark/core/check.hpp"
#include "latentmark/core/rng.hpp"

namespace latentmark {

namespace {

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

BitMessage::BitMessage(std::vector<uint8_t> bits) : bits_(std::move(bits)) {
    check(!bits_.empty(), "BitMessage: k must be >= 1");
    for (size_t i = 0; i < bits_.size(); ++i)
        check(bits_[i] == 0 || bits_[i] == 1,
              "BitMessage: bit " + std::to_string(i) + " is not 0/1");
}

BitMessage BitMessage::from_hex(const std::string& hex, int k) {
    check(k >= 1, "message_from_hex: k must be >= 1");
    const size_t want = static_cast<size_t>((k + 3) / 4);
    if (hex.size() != want)
        throw ParseError("message_from_hex: expected " + std::to_string(want) + " hex digits for k=" +
                         std::to_string(k) + ", got " + std::to_string(hex.size()));
    std::vector<uint8_t> bits(static_cast<size_t>(k));
    for (size_t d = 0; d < hex.size(); ++d) {
        const int v = hex_digit(hex[d]);
        if (v < 0)
            throw ParseError("message_from_hex: malformed hex digit '" + std::string(1, hex[d]) +
                             "' at index " + std::to_string(d));
        for (int b = 0; b < 4; ++b) {
            const size_t pos = d * 4 + static_cast<size_t>(b);
            if (pos < bits.size()) bits[pos] = static_cast<uint8_t>((v >> (3 - b)) & 1);
        }
    }
    return BitMessage(std::move(bits));
}

BitMessage BitMessage::random(int k, uint64_t seed) {
    check(k >= 1, "random_message: k must be >= 1");
    Rng rng(seed);
    std::vector<uint8_t> bits(static_cast<size_t>(k));
    for (auto& b : bits) b = static_cast<uint8_t>(rng.next_u64() & 1);
    return BitMessage(std::move(bits));
}

std::string BitMessage::to_hex() const {
    static const char* digits = "0123456789abcdef";
    const size_t nd = (bits_.size() + 3) / 4;
    std::string out(nd, '0');
    for (size_t d = 0; d < nd; ++d) {
        int v = 0;
        for (int b = 0; b < 4; ++b) {
            const size_t pos = d * 4 + static_cast<size_t>(b);
            const int bit = pos < bits_.size() ? bits_[pos] : 0;
            v = (v << 1) | bit;
        }
        out[d] = digits[v];
    }
    return out;
}

uint64_t BitMessage::packed64() const {
    uint64_t v = 0;
    const size_t n = std::min<size_t>(bits_.size(), 64);
    for (size_t i = 0; i < n; ++i) v = (v << 1) | bits_[i];
    return v;
}

BitMessage BitMessage::complement() const {
    std::vector<uint8_t> b = bits_;
    for (auto& x : b) x ^= 1;
    return BitMessage(std::move(b));
}

BitMessage message_from_hex(const std::string& hex, int k) { return BitMessage::from_hex(hex, k); }

BitMessage random_message(int k, uint64_t seed) { return BitMessage::random(k, seed); }

}  // namespace latentmark
