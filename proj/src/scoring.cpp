#include "lgsel/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include "lgsel/error.hpp"

namespace lgsel {
namespace {

using Kind = Method::Kind;

[[noreturn]] void throw_missing_mask(const Candidate& c) {
    throw Error(ErrorKind::missing_mask, "candidate '" + c.id + "' has no mask", std::nullopt, c.id);
}

[[noreturn]] void throw_kth(const Candidate& c, std::uint32_t k, std::size_t len) {
    throw Error(ErrorKind::kth_out_of_range,
                "k=" + std::to_string(k) + " exceeds the " + std::to_string(len) +
                    " effective tokens of candidate '" + c.id + "'",
                std::nullopt, c.id);
}

[[noreturn]] void throw_token(const Candidate& c, TokenId t, std::uint32_t vocab) {
    throw Error(ErrorKind::token_out_of_range,
                "candidate '" + c.id + "' token " + std::to_string(t) + " >= vocab size " +
                    std::to_string(vocab),
                std::nullopt, c.id);
}

// Token list access with optional indirection through the 1-based mask.
struct EffectiveTokens {
    std::span<const TokenId> tokens;
    const std::vector<std::uint32_t>* mask = nullptr;

    std::size_t size() const noexcept { return mask ? mask->size() : tokens.size(); }
    TokenId operator[](std::size_t i) const noexcept { return mask ? tokens[(*mask)[i] - 1] : tokens[i]; }
};

EffectiveTokens effective(const Candidate& c, bool use_mask) {
    if (c.tokens.empty()) {
        throw Error(ErrorKind::empty_tokens, "candidate '" + c.id + "' has no tokens", std::nullopt, c.id);
    }
    if (!use_mask) return {c.tokens, nullptr};
    if (!c.mask) throw_missing_mask(c);
    for (auto pos : *c.mask) {
        if (pos < 1 || pos > c.tokens.size()) {
            throw Error(ErrorKind::malformed_mask,
                        "candidate '" + c.id + "' mask position " + std::to_string(pos) + " out of range",
                        std::nullopt, c.id);
        }
    }
    if (c.mask->empty()) {
        throw Error(ErrorKind::malformed_mask, "candidate '" + c.id + "' has an empty mask", std::nullopt,
                    c.id);
    }
    return {c.tokens, &*c.mask};
}

template <Kind K>
double fold(const std::vector<float>& values, const Candidate& c, const EffectiveTokens& t, std::uint32_t k) {
    const auto vocab = static_cast<std::uint32_t>(values.size());
    auto at = [&](std::size_t i) -> double {
        const TokenId id = t[i];
        if (id >= vocab) throw_token(c, id, vocab);
        return static_cast<double>(values[id]);
    };
    const std::size_t n = t.size();
    if constexpr (K == Kind::first) {
        return at(0);
    } else if constexpr (K == Kind::last) {
        return at(n - 1);
    } else if constexpr (K == Kind::kth) {
        if (k > n) throw_kth(c, k, n);
        return at(k - 1);
    } else if constexpr (K == Kind::sum || K == Kind::average) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += at(i);
        if constexpr (K == Kind::average) return acc / static_cast<double>(n);
        return acc;
    } else {
        double acc = 0.0;
        std::size_t taken = 0;
        for (std::size_t i = 0; i < n; i += 2, ++taken) acc += at(i);
        return acc / static_cast<double>(taken);
    }
}

template <Kind K>
void aggregate_all(const LogitFrame& frame, const CandidatePool& pool, std::uint32_t k, bool use_mask,
                   std::vector<double>& out) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const Candidate& c = pool.candidates[i];
        out[i] = fold<K>(frame.values, c, effective(c, use_mask), k);
    }
}

void softmax_in_place(std::vector<double>& v) {
    const double max = *std::max_element(v.begin(), v.end());
    double total = 0.0;
    for (auto& x : v) {
        x = std::exp(x - max);
        total += x;
    }
    for (auto& x : v) x /= total;
}

void check_pool_size(const CandidatePool& pool) {
    if (pool.size() < 2) {
        throw Error(ErrorKind::too_few_candidates,
                    "pool needs at least 2 candidates, got " + std::to_string(pool.size()));
    }
}

}  // namespace

double aggregate(const LogitFrame& frame, const Candidate& candidate, const Method& method, bool use_mask) {
    const auto t = effective(candidate, use_mask);
    switch (method.kind) {
        case Kind::first: return fold<Kind::first>(frame.values, candidate, t, 0);
        case Kind::last: return fold<Kind::last>(frame.values, candidate, t, 0);
        case Kind::kth:
            if (method.k < 1) throw Error(ErrorKind::invalid_argument, "kth method requires k >= 1");
            return fold<Kind::kth>(frame.values, candidate, t, method.k);
        case Kind::average: return fold<Kind::average>(frame.values, candidate, t, 0);
        case Kind::sum: return fold<Kind::sum>(frame.values, candidate, t, 0);
        case Kind::sample_average: return fold<Kind::sample_average>(frame.values, candidate, t, 0);
    }
    throw Error(ErrorKind::invalid_argument, "unknown method kind");
}

ScoreVector score_pool(const LogitFrame& frame, const CandidatePool& pool, const Method& method,
                       bool use_mask) {
    check_pool_size(pool);
    ScoreVector out;
    out.aggregates.resize(pool.size());
    switch (method.kind) {
        case Kind::first: aggregate_all<Kind::first>(frame, pool, 0, use_mask, out.aggregates); break;
        case Kind::last: aggregate_all<Kind::last>(frame, pool, 0, use_mask, out.aggregates); break;
        case Kind::kth:
            if (method.k < 1) throw Error(ErrorKind::invalid_argument, "kth method requires k >= 1");
            aggregate_all<Kind::kth>(frame, pool, method.k, use_mask, out.aggregates);
            break;
        case Kind::average: aggregate_all<Kind::average>(frame, pool, 0, use_mask, out.aggregates); break;
        case Kind::sum: aggregate_all<Kind::sum>(frame, pool, 0, use_mask, out.aggregates); break;
        case Kind::sample_average:
            aggregate_all<Kind::sample_average>(frame, pool, 0, use_mask, out.aggregates);
            break;
    }
    out.probabilities = out.aggregates;
    softmax_in_place(out.probabilities);
    return out;
}

ScoreVector score_pool_naive(const LogitFrame& frame, const CandidatePool& pool, const Method& method,
                             bool use_mask) {
    check_pool_size(pool);
    ScoreVector out;
    for (const auto& c : pool.candidates) {
        out.aggregates.push_back(aggregate(frame, c, method, use_mask));
    }
    double max = -std::numeric_limits<double>::infinity();
    for (double a : out.aggregates) max = std::max(max, a);
    double denom = 0.0;
    for (double a : out.aggregates) denom += std::exp(a - max);
    for (double a : out.aggregates) out.probabilities.push_back(std::exp(a - max) / denom);
    return out;
}

Ranking top_k(const ScoreVector& scores, const CandidatePool& pool, std::size_t k) {
    if (k < 1) throw Error(ErrorKind::invalid_argument, "top-k requires k >= 1");
    const std::size_t n = scores.probabilities.size();
    if (n != pool.size() || scores.aggregates.size() != n) {
        throw Error(ErrorKind::dimension_mismatch, "score vector does not match pool size");
    }
    const std::size_t take = std::min(k, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Aggregates break ties between probabilities that collapsed in exp();
    // softmax is monotone so this never contradicts the probability order.
    auto before = [&](std::size_t a, std::size_t b) {
        if (scores.probabilities[a] != scores.probabilities[b]) {
            return scores.probabilities[a] > scores.probabilities[b];
        }
        if (scores.aggregates[a] != scores.aggregates[b]) return scores.aggregates[a] > scores.aggregates[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), before);

    Ranking ranking;
    ranking.k = k;
    ranking.entries.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
        const std::size_t i = order[r];
        ranking.entries.push_back({pool.candidates[i].id, i, scores.probabilities[i]});
    }
    return ranking;
}

}  // namespace lgsel
