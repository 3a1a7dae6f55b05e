#include "lgsel/pool_index.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "detail/util.hpp"
#include "lgsel/error.hpp"

namespace lgsel {
namespace {

using detail::json;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Whitespace-delimited words; a word preceded by whitespace keeps one leading ' '.
std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
            pending_space = true;
            continue;
        }
        if (current.empty() && pending_space) current.push_back(' ');
        pending_space = false;
        current.push_back(c);
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

std::string byte_piece(unsigned char b) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    return std::string("<0x") + kHex[b >> 4] + kHex[b & 0xf] + ">";
}

std::vector<std::uint32_t> parse_positions(const json& arr, const std::string& where, std::size_t line,
                                           const std::string& id) {
    if (!arr.is_array()) {
        throw Error(ErrorKind::malformed_mask, where + ": mask must be an array of integers", line, id);
    }
    std::vector<std::uint32_t> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number_integer()) {
            throw Error(ErrorKind::malformed_mask, where + ": mask positions must be integers", line, id);
        }
        const auto p = v.get<std::int64_t>();
        if (p < 1 || p > std::numeric_limits<std::uint32_t>::max()) {
            throw Error(ErrorKind::malformed_mask,
                        where + ": mask position " + std::to_string(p) + " is not a 1-based position", line,
                        id);
        }
        out.push_back(static_cast<std::uint32_t>(p));
    }
    return out;
}

std::string require_string(const json& obj, const char* key, ErrorKind kind, const std::string& where,
                           std::size_t line, const std::string& id = {}) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw Error(kind, where + ": missing string field \"" + key + "\"" + (id.empty() ? "" : " in '" + id + "'"),
                    line, id);
    }
    return it->get<std::string>();
}

}  // namespace

// ---------------------------------------------------------------------------
// ReferenceTokenizer

ReferenceTokenizer ReferenceTokenizer::fit(std::span<const std::string> texts, bool prepend_space) {
    ReferenceTokenizer tok;
    std::string joined;
    for (const auto& text : texts) {
        for (auto& w : split_words(prepend_space ? " " + text : text)) {
            if (tok.ids_.contains(w)) continue;
            tok.ids_.emplace(w, kByteTokens + static_cast<TokenId>(tok.words_.size()));
            joined += w;
            joined.push_back('\n');
            tok.words_.push_back(std::move(w));
        }
    }
    tok.fingerprint_ = "ref1-" + detail::sha256_hex(joined).substr(0, 16);
    return tok;
}

std::vector<TokenId> ReferenceTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    for (const auto& w : split_words(text)) {
        if (auto it = ids_.find(w); it != ids_.end()) {
            out.push_back(it->second);
        } else {
            for (unsigned char b : w) out.push_back(b);
        }
    }
    return out;
}

std::uint32_t ReferenceTokenizer::vocab_size() const {
    return kByteTokens + static_cast<std::uint32_t>(words_.size());
}

// ---------------------------------------------------------------------------
// VocabTokenizer

VocabTokenizer VocabTokenizer::from_pieces(std::vector<std::string> pieces, std::string fingerprint) {
    VocabTokenizer tok;
    tok.pieces_ = std::move(pieces);
    for (std::size_t i = 0; i < tok.pieces_.size(); ++i) {
        const auto& p = tok.pieces_[i];
        if (p.empty()) throw Error(ErrorKind::malformed_record, "tokenizer piece " + std::to_string(i) + " is empty", i);
        if (!tok.ids_.emplace(p, static_cast<TokenId>(i)).second) {
            throw Error(ErrorKind::duplicate_id, "tokenizer piece '" + p + "' appears twice", i);
        }
        tok.max_piece_len_ = std::max(tok.max_piece_len_, p.size());
    }
    tok.fingerprint_ = std::move(fingerprint);
    return tok;
}

VocabTokenizer VocabTokenizer::load(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file(path);
    json def;
    try {
        def = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::parse_error, path.string() + ": " + e.what());
    }
    if (!def.is_object() || def.value("format", "") != "lgsel-tokenizer") {
        throw Error(ErrorKind::parse_error, path.string() + ": not an lgsel-tokenizer definition");
    }
    if (def.value("version", 0) != 1) {
        throw Error(ErrorKind::version_mismatch, path.string() + ": unsupported tokenizer version");
    }
    auto it = def.find("pieces");
    if (it == def.end() || !it->is_array()) {
        throw Error(ErrorKind::malformed_record, path.string() + ": missing \"pieces\" array");
    }
    std::vector<std::string> pieces;
    for (const auto& p : *it) {
        if (!p.is_string()) throw Error(ErrorKind::malformed_record, path.string() + ": pieces must be strings");
        pieces.push_back(p.get<std::string>());
    }
    return from_pieces(std::move(pieces), "vocab-" + detail::sha256_hex(bytes).substr(0, 16));
}

std::vector<TokenId> VocabTokenizer::encode(std::string_view text) const {
    static constexpr std::string_view kSpace = "\xE2\x96\x81";  // U+2581
    std::string s;
    s.reserve(text.size() + 8);
    for (char c : text) {
        if (c == ' ') {
            s += kSpace;
        } else {
            s.push_back(c);
        }
    }
    std::vector<TokenId> out;
    std::size_t i = 0;
    while (i < s.size()) {
        bool matched = false;
        for (std::size_t len = std::min(max_piece_len_, s.size() - i); len > 0; --len) {
            if (auto it = ids_.find(s.substr(i, len)); it != ids_.end()) {
                out.push_back(it->second);
                i += len;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        const auto b = static_cast<unsigned char>(s[i]);
        auto it = ids_.find(byte_piece(b));
        if (it == ids_.end()) {
            throw Error(ErrorKind::invalid_argument,
                        "tokenizer has no piece or byte fallback for byte " + byte_piece(b));
        }
        out.push_back(it->second);
        ++i;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Candidate and mask files

std::vector<CandidateRecord> read_candidate_file(const std::filesystem::path& path) {
    std::vector<CandidateRecord> records;
    std::unordered_set<std::string> seen;
    const std::string src = path.string();
    detail::for_each_json_line(path, [&](std::size_t line, const json& obj) {
        const std::string where = src + ":" + std::to_string(line);
        CandidateRecord rec;
        rec.line = line;
        rec.id = require_string(obj, "id", ErrorKind::parse_error, where, line);
        rec.text = require_string(obj, "text", ErrorKind::parse_error, where, line, rec.id);
        if (auto it = obj.find("mask"); it != obj.end()) rec.mask = parse_positions(*it, where, line, rec.id);
        if (!seen.insert(rec.id).second) {
            throw Error(ErrorKind::duplicate_id, where + ": duplicate candidate id '" + rec.id + "'", line,
                        rec.id);
        }
        records.push_back(std::move(rec));
    });
    return records;
}

std::vector<MaskRecord> read_mask_file(const std::filesystem::path& path) {
    std::vector<MaskRecord> records;
    const std::string src = path.string();
    detail::for_each_json_line(path, [&](std::size_t line, const json& obj) {
        const std::string where = src + ":" + std::to_string(line);
        MaskRecord rec;
        rec.line = line;
        rec.id = require_string(obj, "id", ErrorKind::parse_error, where, line);
        auto it = obj.find("positions");
        if (it == obj.end()) {
            throw Error(ErrorKind::parse_error, where + ": missing \"positions\" for '" + rec.id + "'", line,
                        rec.id);
        }
        rec.positions = parse_positions(*it, where, line, rec.id);
        records.push_back(std::move(rec));
    });
    return records;
}

// ---------------------------------------------------------------------------
// Building

CandidatePool build_pool(std::span<const CandidateRecord> records, const TokenizerAdapter& adapter,
                         bool prepend_space) {
    CandidatePool pool;
    pool.tokenizer_fingerprint = adapter.fingerprint();
    pool.prepend_space = prepend_space;
    pool.candidates.reserve(records.size());
    for (const auto& rec : records) {
        Candidate c;
        c.id = rec.id;
        c.text = rec.text;
        c.mask = rec.mask;
        if (rec.text.find_first_not_of(" \t\r\n\f\v") != std::string::npos) {
            c.tokens = adapter.encode(prepend_space ? " " + rec.text : rec.text);
        }
        if (c.tokens.empty()) {
            throw Error(ErrorKind::empty_tokens,
                        "line " + std::to_string(rec.line) + ": candidate '" + rec.id + "' encodes to no tokens",
                        rec.line, rec.id);
        }
        pool.candidates.push_back(std::move(c));
    }
    validate_pool(pool, adapter.vocab_size());
    return pool;
}

CandidatePool build_pool(const std::filesystem::path& candidate_file, const TokenizerAdapter& adapter,
                         bool prepend_space) {
    const auto records = read_candidate_file(candidate_file);
    return build_pool(records, adapter, prepend_space);
}

CandidatePool build_pool_reference(const std::filesystem::path& candidate_file, bool prepend_space) {
    const auto records = read_candidate_file(candidate_file);
    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const auto& r : records) texts.push_back(r.text);
    const auto tok = ReferenceTokenizer::fit(texts, prepend_space);
    return build_pool(records, tok, prepend_space);
}

// ---------------------------------------------------------------------------
// Persistence

std::string serialize_pool(const CandidatePool& pool) {
    if (pool.tokenizer_fingerprint.empty()) {
        throw Error(ErrorKind::fingerprint_missing, "pool has no tokenizer fingerprint");
    }
    std::ostringstream out;
    nlohmann::ordered_json header;
    header["format"] = "lgsel-pool";
    header["version"] = kPoolFormatVersion;
    header["tokenizer"] = pool.tokenizer_fingerprint;
    header["prepend_space"] = pool.prepend_space;
    out << header.dump() << '\n';
    for (const auto& c : pool.candidates) {
        nlohmann::ordered_json rec;
        rec["id"] = c.id;
        rec["text"] = c.text;
        rec["tokens"] = c.tokens;
        if (c.mask) rec["mask"] = *c.mask;
        out << rec.dump() << '\n';
    }
    return std::move(out).str();
}

void save_pool(const CandidatePool& pool, const std::filesystem::path& path) {
    detail::write_file(path, serialize_pool(pool));
}

CandidatePool parse_pool(std::string_view contents) {
    CandidatePool pool;
    bool have_header = false;
    detail::for_each_json_line(contents, "pool", [&](std::size_t line, const json& obj) {
        const std::string where = "pool:" + std::to_string(line);
        if (!have_header) {
            have_header = true;
            if (obj.value("format", "") != "lgsel-pool") {
                throw Error(ErrorKind::parse_error, where + ": missing lgsel-pool header", line);
            }
            auto v = obj.find("version");
            if (v == obj.end() || !v->is_number_integer() || v->get<std::int64_t>() != kPoolFormatVersion) {
                throw Error(ErrorKind::version_mismatch,
                            where + ": unsupported pool version " + (v == obj.end() ? "(absent)" : v->dump()), line);
            }
            auto fp = obj.find("tokenizer");
            if (fp == obj.end() || !fp->is_string() || fp->get<std::string>().empty()) {
                throw Error(ErrorKind::fingerprint_missing, where + ": header has no tokenizer fingerprint", line);
            }
            pool.tokenizer_fingerprint = fp->get<std::string>();
            auto ps = obj.find("prepend_space");
            if (ps == obj.end() || !ps->is_boolean()) {
                throw Error(ErrorKind::malformed_record, where + ": header needs boolean prepend_space", line);
            }
            pool.prepend_space = ps->get<bool>();
            return;
        }
        Candidate c;
        c.id = require_string(obj, "id", ErrorKind::malformed_record, where, line);
        c.text = require_string(obj, "text", ErrorKind::malformed_record, where, line, c.id);
        auto toks = obj.find("tokens");
        if (toks == obj.end() || !toks->is_array()) {
            throw Error(ErrorKind::malformed_record, where + ": record '" + c.id + "' has no \"tokens\" array",
                        line, c.id);
        }
        c.tokens.reserve(toks->size());
        for (const auto& t : *toks) {
            if (!t.is_number_unsigned() || t.get<std::uint64_t>() > std::numeric_limits<TokenId>::max()) {
                throw Error(ErrorKind::malformed_record, where + ": record '" + c.id + "' has a non-u32 token",
                            line, c.id);
            }
            c.tokens.push_back(t.get<TokenId>());
        }
        if (auto m = obj.find("mask"); m != obj.end()) c.mask = parse_positions(*m, where, line, c.id);
        pool.candidates.push_back(std::move(c));
    });
    if (!have_header) throw Error(ErrorKind::parse_error, "pool file is empty");
    validate_pool(pool, std::numeric_limits<std::uint32_t>::max());
    return pool;
}

CandidatePool load_pool(const std::filesystem::path& path) {
    return parse_pool(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Masks

CandidatePool attach_masks(const CandidatePool& pool, std::span<const MaskRecord> masks) {
    CandidatePool out = pool;
    std::unordered_set<std::string> seen;
    for (const auto& m : masks) {
        const auto ordinal = pool.ordinal_of(m.id);
        if (!ordinal) {
            throw Error(ErrorKind::unknown_id, "mask line " + std::to_string(m.line) + ": unknown candidate '" + m.id + "'",
                        m.line, m.id);
        }
        if (!seen.insert(m.id).second) {
            throw Error(ErrorKind::duplicate_id, "mask for '" + m.id + "' given twice", m.line, m.id);
        }
        if (m.positions.empty()) {
            throw Error(ErrorKind::empty_mask, "mask for '" + m.id + "' is empty", m.line, m.id);
        }
        auto positions = m.positions;
        std::sort(positions.begin(), positions.end());
        const auto len = pool.candidates[*ordinal].tokens.size();
        for (std::size_t i = 0; i < positions.size(); ++i) {
            if (positions[i] < 1 || positions[i] > len) {
                throw Error(ErrorKind::position_out_of_range,
                            "mask for '" + m.id + "' has position " + std::to_string(positions[i]) +
                                " outside [1, " + std::to_string(len) + "]",
                            m.line, m.id);
            }
            if (i > 0 && positions[i] == positions[i - 1]) {
                throw Error(ErrorKind::malformed_mask, "mask for '" + m.id + "' repeats a position", m.line, m.id);
            }
        }
        out.candidates[*ordinal].mask = std::move(positions);
    }
    return out;
}

CandidatePool attach_masks(const CandidatePool& pool, const std::filesystem::path& mask_file) {
    const auto masks = read_mask_file(mask_file);
    return attach_masks(pool, masks);
}

std::uint32_t required_vocab(const CandidatePool& pool) {
    TokenId max = 0;
    for (const auto& c : pool.candidates) {
        for (auto t : c.tokens) max = std::max(max, t);
    }
    return max + 1;
}

}  // namespace lgsel
