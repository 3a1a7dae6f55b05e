#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lgsel/core_types.hpp"

namespace lgsel {

/// Boundary between the engine and whatever subword tokenizer produced the
/// frames. Implementations must be deterministic, and their fingerprint must
/// change whenever encode() behavior changes.
class TokenizerAdapter {
public:
    virtual ~TokenizerAdapter() = default;
    virtual std::string fingerprint() const = 0;
    virtual std::vector<TokenId> encode(std::string_view text) const = 0;
    virtual std::uint32_t vocab_size() const = 0;
};

/// Test tokenizer: splits on ASCII whitespace, a word preceded by whitespace
/// keeps a leading-space marker (so " word" and "word" differ), and each
/// distinct word in the fitted table gets one id. Ids 0-255 are raw bytes,
/// used as fallback for words outside the table.
class ReferenceTokenizer final : public TokenizerAdapter {
public:
    /// Builds the word table over `texts` in first-appearance order.
    static ReferenceTokenizer fit(std::span<const std::string> texts, bool prepend_space);

    std::string fingerprint() const override { return fingerprint_; }
    std::vector<TokenId> encode(std::string_view text) const override;
    std::uint32_t vocab_size() const override;

    static constexpr std::uint32_t kByteTokens = 256;

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, TokenId> ids_;
    std::string fingerprint_;
};

/// Tokenizer loaded from a definition file:
///   {"format":"lgsel-tokenizer","version":1,"pieces":["<0x00>", ..., "▁the", ...]}
/// Spaces are rewritten to U+2581 and the text is segmented by greedy
/// longest-piece match. Bytes with no covering piece fall back to "<0xNN>"
/// pieces. The fingerprint is a content hash of the file bytes.
class VocabTokenizer final : public TokenizerAdapter {
public:
    static VocabTokenizer load(const std::filesystem::path& path);
    static VocabTokenizer from_pieces(std::vector<std::string> pieces, std::string fingerprint);

    std::string fingerprint() const override { return fingerprint_; }
    std::vector<TokenId> encode(std::string_view text) const override;
    std::uint32_t vocab_size() const override { return static_cast<std::uint32_t>(pieces_.size()); }

private:
    std::vector<std::string> pieces_;
    std::unordered_map<std::string, TokenId> ids_;
    std::size_t max_piece_len_ = 0;
    std::string fingerprint_;
};

/// One line of a candidate input file.
struct CandidateRecord {
    std::string id;
    std::string text;
    std::optional<std::vector<std::uint32_t>> mask;
    std::size_t line = 0;
};

struct MaskRecord {
    std::string id;
    std::vector<std::uint32_t> positions;
    std::size_t line = 0;
};

std::vector<CandidateRecord> read_candidate_file(const std::filesystem::path& path);
std::vector<MaskRecord> read_mask_file(const std::filesystem::path& path);

/// Encodes each text (with one leading space when `prepend_space`) and
/// validates the result against the adapter's vocabulary.
CandidatePool build_pool(std::span<const CandidateRecord> records, const TokenizerAdapter& adapter,
                         bool prepend_space = true);
CandidatePool build_pool(const std::filesystem::path& candidate_file, const TokenizerAdapter& adapter,
                         bool prepend_space = true);
/// Fits a ReferenceTokenizer over the file's texts, then builds.
CandidatePool build_pool_reference(const std::filesystem::path& candidate_file, bool prepend_space = true);

inline constexpr int kPoolFormatVersion = 1;

void save_pool(const CandidatePool& pool, const std::filesystem::path& path);
std::string serialize_pool(const CandidatePool& pool);
CandidatePool load_pool(const std::filesystem::path& path);
CandidatePool parse_pool(std::string_view contents);

CandidatePool attach_masks(const CandidatePool& pool, std::span<const MaskRecord> masks);
CandidatePool attach_masks(const CandidatePool& pool, const std::filesystem::path& mask_file);

/// Largest token id in the pool plus one.
std::uint32_t required_vocab(const CandidatePool& pool);

}  // namespace lgsel
