#include "latentmark/matching/matching.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "latentmark/core/check.hpp"
#include "latentmark/core/rng.hpp"

namespace latentmark::matching {

int match_count(const BitMessage& extracted, const BitMessage& reference) {
    check_shape(extracted.k() == reference.k(), "match_count: message lengths differ (" +
                                                    std::to_string(extracted.k()) + " vs " +
                                                    std::to_string(reference.k()) + ")");
    int m = 0;
    for (int i = 0; i < extracted.k(); ++i)
        if (extracted.bit(i) == reference.bit(i)) ++m;
    return m;
}

namespace {

// C(k, i) for k <= 64 fits in 64 bits; the running tail fits in 128.
unsigned __int128 binomial_u128(int k, int i) {
    unsigned __int128 r = 1;
    if (i > k - i) i = k - i;
    for (int t = 1; t <= i; ++t) {
        r *= static_cast<unsigned>(k - i + t);
        r /= static_cast<unsigned>(t);
    }
    return r;
}

double log_binomial(int k, int i) {
    return std::lgamma(k + 1.0) - std::lgamma(i + 1.0) - std::lgamma(k - i + 1.0);
}

}  // namespace

double fpr_detection(int n, int k) {
    check(k >= 1, "fpr_detection: k must be >= 1");
    check(n >= 0 && n <= k, "fpr_detection: n=" + std::to_string(n) + " outside [0, " + std::to_string(k) + "]");
    if (n == 0) return 1.0;
    if (k <= 64) {
        unsigned __int128 tail = 0;
        for (int i = n; i <= k; ++i) tail += binomial_u128(k, i);
        const long double p = static_cast<long double>(tail) * std::exp2l(static_cast<long double>(-k));
        return static_cast<double>(p);
    }
    // log-domain tail: logsumexp of log C(k,i) - k log 2
    const double log2k = k * std::log(2.0);
    double maxlog = -INFINITY;
    std::vector<double> logs;
    logs.reserve(static_cast<size_t>(k - n + 1));
    for (int i = n; i <= k; ++i) {
        logs.push_back(log_binomial(k, i) - log2k);
        maxlog = std::max(maxlog, logs.back());
    }
    double acc = 0;
    for (double l : logs) acc += std::exp(l - maxlog);
    return std::exp(maxlog) * acc;
}

double fpr_attribution(int64_t num_users, int n, int k) {
    check(num_users >= 1, "fpr_attribution: number of users must be >= 1");
    const double p = fpr_detection(n, k);
    if (p == 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    return -std::expm1(static_cast<double>(num_users) * std::log1p(-p));
}

int solve_threshold(double target_fpr_att, int64_t num_users, int k) {
    check(target_fpr_att > 0.0 && target_fpr_att < 1.0, "solve_threshold: target must be in (0, 1)");
    check(num_users >= 1, "solve_threshold: number of users must be >= 1");
    for (int n = 0; n <= k; ++n)
        if (fpr_attribution(num_users, n, k) <= target_fpr_att) return n;
    // fpr_attribution(N, k, k) = 1 - (1 - 2^-k)^N may still exceed tiny
    // targets for huge N; report that no threshold works
    throw ValidationError("solve_threshold: no threshold reaches target " + std::to_string(target_fpr_att) +
                          " for N=" + std::to_string(num_users) + ", k=" + std::to_string(k));
}

std::string MatchReport::to_line() const {
    std::ostringstream os;
    os << "matched_bits=" << matched_bits << "\tthreshold=" << threshold
       << "\tdecision=" << (decision ? "1" : "0");
    os.precision(12);
    os << "\tfpr_det=" << fpr_det;
    os << "\tmatched_user=" << (matched_user ? *matched_user : "-");
    return os.str();
}

MatchReport detect(const BitMessage& extracted, const BitMessage& reference, int n) {
    MatchReport r;
    r.matched_bits = match_count(extracted, reference);
    r.threshold = n;
    r.decision = r.matched_bits >= n;
    r.fpr_det = fpr_detection(n, extracted.k());
    return r;
}

void UserRegistry::add(const std::string& user_id, const BitMessage& message) {
    check(!user_id.empty(), "registry: empty user id");
    for (const auto& [id, _] : entries_)
        check(id != user_id, "registry: duplicate user id '" + user_id + "'");
    if (entries_.empty())
        k_ = message.k();
    else
        check(message.k() == k_, "registry: message for '" + user_id + "' has length " +
                                     std::to_string(message.k()) + ", registry holds k=" + std::to_string(k_));
    entries_.emplace_back(user_id, message);
}

UserRegistry UserRegistry::load(const std::string& path, int k) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open message file: " + path);
    UserRegistry reg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected user_id<TAB>hex_message");
        const std::string id = line.substr(0, tab);
        const std::string hex = line.substr(tab + 1);
        const int kk = k > 0 ? k : static_cast<int>(hex.size()) * 4;
        try {
            reg.add(id, BitMessage::from_hex(hex, kk));
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return reg;
}

void UserRegistry::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write message file: " + path);
    f << "# user_id\thex_message (k=" << k_ << ")\n";
    for (const auto& [id, m] : entries_) f << id << "\t" << m.to_hex() << "\n";
}

MatchReport attribute(const BitMessage& extracted, const UserRegistry& registry, int n) {
    check(registry.size() > 0, "attribute: registry is empty");
    MatchReport r;
    r.threshold = n;
    r.fpr_det = fpr_detection(n, extracted.k());
    int best = -1;
    const std::string* best_id = nullptr;
    for (const auto& [id, m] : registry.entries()) {
        const int c = match_count(extracted, m);
        if (c > best || (c == best && best_id && id < *best_id)) {
            best = c;
            best_id = &id;
        }
    }
    r.matched_bits = best;
    if (best >= n) {
        r.decision = true;
        r.matched_user = *best_id;
    }
    return r;
}

SimulationReport simulate_attribution(int64_t num_users, int images_per_user, double flip_probability,
                                      double target_fpr_att, int k, uint64_t seed) {
    check(num_users >= 1 && images_per_user >= 1, "simulate_attribution: counts must be positive");
    check(flip_probability >= 0.0 && flip_probability <= 0.5,
          "simulate_attribution: flip probability must be in [0, 0.5]");
    check(k >= 1 && k <= 64, "simulate_attribution: k must be in [1, 64]");

    SimulationReport rep;
    rep.threshold = solve_threshold(target_fpr_att, num_users, k);

    Rng rng(seed);
    const uint64_t mask = k == 64 ? ~0ULL : ((1ULL << k) - 1);
    std::vector<uint64_t> users(static_cast<size_t>(num_users));
    std::unordered_set<uint64_t> seen;
    seen.reserve(static_cast<size_t>(num_users) * 2);
    for (auto& u : users) {
        do {
            u = rng.next_u64() & mask;
        } while (!seen.insert(u).second);
    }

    for (int64_t uid = 0; uid < num_users; ++uid) {
        for (int im = 0; im < images_per_user; ++im) {
            uint64_t extracted = users[static_cast<size_t>(uid)];
            if (flip_probability > 0) {
                uint64_t flips = 0;
                for (int b = 0; b < k; ++b)
                    if (rng.bernoulli(flip_probability)) flips |= (1ULL << b);
                extracted ^= flips;
            }
            // argmax match count; ties toward the lower user index
            int best = -1;
            int64_t best_uid = -1;
            for (int64_t other = 0; other < num_users; ++other) {
                const int c = k - std::popcount(extracted ^ users[static_cast<size_t>(other)]);
                if (c > best) {
                    best = c;
                    best_uid = other;
                }
            }
            ++rep.total_images;
            if (best >= rep.threshold) {
                if (best_uid == uid)
                    ++rep.true_positives;
                else
                    ++rep.false_attributions;
            }
        }
    }
    rep.accuracy = static_cast<double>(rep.true_positives) / static_cast<double>(rep.total_images);
    return rep;
}

}  // namespace latentmark::matching
