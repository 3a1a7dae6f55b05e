#include "lgsel/core_types.hpp"

#include <cmath>
#include <map>
#include <unordered_set>

#include "lgsel/error.hpp"

namespace lgsel {

std::optional<std::size_t> CandidatePool::ordinal_of(std::string_view id) const {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].id == id) return i;
    }
    return std::nullopt;
}

Method Method::kth(std::uint32_t k) {
    if (k < 1) throw Error(ErrorKind::invalid_argument, "kth method requires k >= 1");
    return {Kind::kth, k};
}

std::string Method::name() const {
    switch (kind) {
        case Kind::first: return "first";
        case Kind::last: return "last";
        case Kind::kth: return "kth";
        case Kind::average: return "average";
        case Kind::sum: return "sum";
        case Kind::sample_average: return "sample-average";
    }
    return "?";
}

std::string Method::label() const {
    if (kind == Kind::kth) return "kth(" + std::to_string(k) + ")";
    return name();
}

Method Method::parse(std::string_view name, std::optional<std::uint32_t> k) {
    if (name == "kth") {
        if (!k) throw Error(ErrorKind::invalid_argument, "method kth requires --kth N");
        return kth(*k);
    }
    if (k) throw Error(ErrorKind::invalid_argument, "--kth is only valid with method kth");
    if (name == "first") return first();
    if (name == "last") return last();
    if (name == "average") return average();
    if (name == "sum") return sum();
    if (name == "sample-average") return sample_average();
    throw Error(ErrorKind::invalid_argument, "unknown method '" + std::string(name) + "'");
}

std::vector<Method> Method::all_kinds(std::uint32_t k) {
    return {first(), last(), kth(k), average(), sum(), sample_average()};
}

const LogitFrame& validate_frame(const LogitFrame& frame) {
    if (frame.vocab_size == 0) {
        throw Error(ErrorKind::dimension_mismatch, "vocab_size must be positive");
    }
    if (frame.values.size() != frame.vocab_size) {
        throw Error(ErrorKind::dimension_mismatch,
                    "expected " + std::to_string(frame.vocab_size) + " values, got " +
                        std::to_string(frame.values.size()));
    }
    if (frame.step < 0) {
        throw Error(ErrorKind::negative_step, "step " + std::to_string(frame.step) + " is negative");
    }
    for (std::size_t i = 0; i < frame.values.size(); ++i) {
        if (!std::isfinite(frame.values[i])) {
            throw Error(ErrorKind::non_finite, "value at index " + std::to_string(i) + " is not finite",
                        i);
        }
    }
    return frame;
}

void validate_candidate(const Candidate& candidate, std::uint32_t vocab_size) {
    if (candidate.tokens.empty()) {
        throw Error(ErrorKind::empty_tokens, "candidate '" + candidate.id + "' has no tokens",
                    std::nullopt, candidate.id);
    }
    for (std::size_t i = 0; i < candidate.tokens.size(); ++i) {
        if (candidate.tokens[i] >= vocab_size) {
            throw Error(ErrorKind::token_out_of_range,
                        "candidate '" + candidate.id + "' token " + std::to_string(candidate.tokens[i]) +
                            " >= vocab size " + std::to_string(vocab_size),
                        i, candidate.id);
        }
    }
    if (!candidate.mask) return;
    const auto& mask = *candidate.mask;
    if (mask.empty()) {
        throw Error(ErrorKind::malformed_mask, "candidate '" + candidate.id + "' has an empty mask",
                    std::nullopt, candidate.id);
    }
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] < 1 || mask[i] > candidate.tokens.size()) {
            throw Error(ErrorKind::malformed_mask,
                        "candidate '" + candidate.id + "' mask position " + std::to_string(mask[i]) +
                            " outside [1, " + std::to_string(candidate.tokens.size()) + "]",
                        i, candidate.id);
        }
        if (i > 0 && mask[i] <= mask[i - 1]) {
            throw Error(ErrorKind::malformed_mask,
                        "candidate '" + candidate.id + "' mask positions must be unique and ascending", i,
                        candidate.id);
        }
    }
}

PoolWarnings validate_pool(const CandidatePool& pool, std::uint32_t vocab_size) {
    if (pool.size() < 2) {
        throw Error(ErrorKind::too_few_candidates,
                    "pool needs at least 2 candidates, got " + std::to_string(pool.size()));
    }
    std::unordered_set<std::string_view> ids;
    ids.reserve(pool.size());
    std::map<std::vector<TokenId>, std::vector<std::string>> by_tokens;
    for (const auto& c : pool.candidates) {
        if (!ids.insert(c.id).second) {
            throw Error(ErrorKind::duplicate_id, "duplicate candidate id '" + c.id + "'", std::nullopt,
                        c.id);
        }
        validate_candidate(c, vocab_size);
        by_tokens[c.tokens].push_back(c.id);
    }
    PoolWarnings warnings;
    for (auto& [tokens, group] : by_tokens) {
        if (group.size() > 1) warnings.duplicate_sequences.push_back(std::move(group));
    }
    return warnings;
}

}  // namespace lgsel
