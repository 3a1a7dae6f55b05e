#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lgsel {

using TokenId = std::uint32_t;

/// One decoding step's scores over the vocabulary. Values are stored in 32-bit
/// form (as on the wire); every consumer accumulates in 64-bit.
struct LogitFrame {
    std::uint32_t vocab_size = 0;
    std::int64_t step = 0;  // 0 = before any decoding
    std::vector<float> values;
    std::string provenance;

    bool operator==(const LogitFrame&) const = default;
};

/// A tokenized answer option. Mask positions are 1-based into `tokens`.
struct Candidate {
    std::string id;
    std::string text;
    std::vector<TokenId> tokens;
    std::optional<std::vector<std::uint32_t>> mask;

    bool operator==(const Candidate&) const = default;
};

struct CandidatePool {
    std::vector<Candidate> candidates;
    std::string tokenizer_fingerprint;
    bool prepend_space = true;

    std::size_t size() const noexcept { return candidates.size(); }
    const Candidate& operator[](std::size_t i) const { return candidates[i]; }
    std::optional<std::size_t> ordinal_of(std::string_view id) const;

    bool operator==(const CandidatePool&) const = default;
};

/// Estimation rule that folds a candidate's token logits into one score.
struct Method {
    enum class Kind { first, last, kth, average, sum, sample_average };

    Kind kind = Kind::first;
    std::uint32_t k = 0;  // only meaningful for Kind::kth (1-based)

    static Method first() { return {Kind::first, 0}; }
    static Method last() { return {Kind::last, 0}; }
    static Method kth(std::uint32_t k);
    static Method average() { return {Kind::average, 0}; }
    static Method sum() { return {Kind::sum, 0}; }
    static Method sample_average() { return {Kind::sample_average, 0}; }

    /// Command-line spelling: first | last | kth | average | sum | sample-average.
    std::string name() const;
    /// Name plus the k for kth, e.g. "kth(3)".
    std::string label() const;
    static Method parse(std::string_view name, std::optional<std::uint32_t> k = std::nullopt);
    static std::vector<Method> all_kinds(std::uint32_t k = 1);

    bool operator==(const Method&) const = default;
};

/// Per-candidate aggregates (pre-softmax) and their normalized probabilities.
struct ScoreVector {
    std::vector<double> aggregates;
    std::vector<double> probabilities;
};

struct RankEntry {
    std::string id;
    std::size_t ordinal = 0;
    double probability = 0.0;

    bool operator==(const RankEntry&) const = default;
};

/// Descending by probability; ties resolved by ascending pool ordinal.
struct Ranking {
    std::vector<RankEntry> entries;
    std::size_t k = 0;
};

/// Candidates sharing an identical token sequence under distinct ids.
struct PoolWarnings {
    std::vector<std::vector<std::string>> duplicate_sequences;

    bool empty() const noexcept { return duplicate_sequences.empty(); }
};

const LogitFrame& validate_frame(const LogitFrame& frame);

/// Throws on the first violated invariant; tokens must be < vocab_size.
PoolWarnings validate_pool(const CandidatePool& pool, std::uint32_t vocab_size);

/// Candidate-level checks shared by validate_pool and mask attachment.
void validate_candidate(const Candidate& candidate, std::uint32_t vocab_size);

}  // namespace lgsel
