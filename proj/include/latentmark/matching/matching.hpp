#pragma once

#include <optional>
#include <string>
#include <vector>

#include "latentmark/core/bit_message.hpp"

namespace latentmark::matching {

// Soft-matching decision rule: flag when M(extracted, registered) >= n.
// FPR values are the matching p-value P(M >= n) under the null hypothesis of
// i.i.d. fair extracted bits, so the reported rate and the decision use one
// convention. (The threshold for "at least n matching bits" equals the
// strict-inequality threshold at n-1.)
int match_count(const BitMessage& extracted, const BitMessage& reference);

// P(M >= n) for k fair bits; exact 128-bit integer binomials for k <= 64,
// log-domain otherwise. Monotone non-increasing in n.
double fpr_detection(int n, int k);

// 1 - (1 - FPR_det(n))^N, evaluated via log1p/expm1 for tiny rates.
double fpr_attribution(int64_t num_users, int n, int k);

// smallest n with fpr_attribution(N, n, k) <= target
int solve_threshold(double target_fpr_att, int64_t num_users, int k);

struct MatchReport {
    int matched_bits = 0;
    int threshold = 0;
    bool decision = false;
    double fpr_det = 1.0;
    std::optional<std::string> matched_user;

    std::string to_line() const;  // structured single-line record
};

MatchReport detect(const BitMessage& extracted, const BitMessage& reference, int n);

class UserRegistry {
public:
    void add(const std::string& user_id, const BitMessage& message);

    // one record per line: user_id<TAB>hex_message, '#' comments.
    // k <= 0 infers the bit length from the first record (4 bits per digit).
    static UserRegistry load(const std::string& path, int k = 0);
    void save(const std::string& path) const;

    int64_t size() const { return static_cast<int64_t>(entries_.size()); }
    int k() const { return k_; }
    const std::vector<std::pair<std::string, BitMessage>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, BitMessage>> entries_;
    int k_ = 0;
};

// Highest match count wins; ties break toward the lowest user_id. No match
// is reported when the best count is below n.
MatchReport attribute(const BitMessage& extracted, const UserRegistry& registry, int n);

struct SimulationReport {
    int64_t total_images = 0;
    int64_t true_positives = 0;
    int64_t false_attributions = 0;
    double accuracy = 0;
    int threshold = 0;
};

// Draws `num_users` distinct random messages, simulates extraction with
// i.i.d. bit flips of probability p, and attributes each image at the solved
// threshold for the requested attribution FPR.
SimulationReport simulate_attribution(int64_t num_users, int images_per_user, double flip_probability,
                                      double target_fpr_att, int k, uint64_t seed);

}  // namespace latentmark::matching
