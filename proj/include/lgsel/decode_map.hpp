#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgsel/core_types.hpp"

namespace lgsel {

/// Indication heads ("A", "B", ...) aligned to pool ordinals.
struct HeadScheme {
    std::vector<std::string> heads;

    /// "A".."Z", then "AA", "AB", ... for n candidates.
    static HeadScheme letters(std::size_t n);
    void check_aligned(std::size_t pool_size) const;
};

enum class MatchSource { head, text };

struct ChoiceMatch {
    std::size_t ordinal = 0;
    std::size_t offset = 0;  // byte offset where the match begins
    MatchSource source = MatchSource::head;
};

/// Maps a fully decoded output to a candidate: the earliest match among
///   "Answer: X", "answer is (X)", "(X)", a bare X followed by one of , . )
///   an output consisting of nothing but X,
/// and case-insensitive verbatim candidate text. Heads are matched
/// case-sensitively and need word boundaries; "answer" is case-insensitive.
/// At equal offsets a head beats candidate text, and longer text beats shorter.
std::optional<ChoiceMatch> match_choice(std::string_view output, std::span<const std::string> candidate_texts,
                                        const HeadScheme& scheme);

std::optional<std::string> extract_choice(std::string_view output, const CandidatePool& pool,
                                          const HeadScheme& scheme);

/// One instance for decode scoring: candidate texts/ids plus gold ids.
struct DecodeItem {
    std::vector<std::string> candidate_ids;
    std::vector<std::string> candidate_texts;
    std::vector<std::string> gold;
};

/// Fraction of outputs whose extracted candidate is gold. Unmatched outputs count as wrong.
/// An empty `scheme` uses letters sized to each item.
double decode_accuracy(std::span<const std::string> outputs, std::span<const DecodeItem> items,
                       const std::optional<HeadScheme>& scheme = std::nullopt);

}  // namespace lgsel
