#include "lgsel/decode_map.hpp"

#include <algorithm>
#include <unordered_set>

#include "lgsel/error.hpp"

namespace lgsel {
namespace {

bool is_word(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u == '_';
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool boundary_before(std::string_view s, std::size_t pos) { return pos == 0 || !is_word(s[pos - 1]); }
bool boundary_after(std::string_view s, std::size_t end) { return end >= s.size() || !is_word(s[end]); }

std::size_t skip_blanks_back(std::string_view s, std::size_t pos) {
    while (pos > 0 && is_blank(s[pos - 1])) --pos;
    return pos;
}

// If s[..end) ends with the word `word` (case-insensitive, with a boundary
// before it), returns the word's start.
std::optional<std::size_t> word_ending_at(std::string_view s, std::size_t end, std::string_view word) {
    if (end < word.size()) return std::nullopt;
    const std::size_t start = end - word.size();
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (lower(s[start + i]) != word[i]) return std::nullopt;
    }
    if (!boundary_before(s, start)) return std::nullopt;
    return start;
}

// Earliest offset at which head occurrence [pos, pos+len) forms a recognised pattern.
std::optional<std::size_t> head_pattern_start(std::string_view s, std::size_t pos, std::size_t len) {
    const std::size_t end = pos + len;
    const bool parens = pos > 0 && s[pos - 1] == '(' && end < s.size() && s[end] == ')';
    std::optional<std::size_t> best;
    auto consider = [&](std::size_t start) {
        if (!best || start < *best) best = start;
    };

    if (parens) {
        consider(pos - 1);
        // answer is (X)
        std::size_t p = skip_blanks_back(s, pos - 1);
        if (p < pos - 1) {
            if (auto is = word_ending_at(s, p, "is")) {
                std::size_t q = skip_blanks_back(s, *is);
                if (q < *is) {
                    if (auto ans = word_ending_at(s, q, "answer")) consider(*ans);
                }
            }
        }
    }
    if (!boundary_before(s, pos) && !parens) return best;

    // Answer: X
    if (boundary_after(s, end)) {
        std::size_t p = skip_blanks_back(s, pos);
        if (p > 0 && s[p - 1] == ':') {
            if (auto ans = word_ending_at(s, skip_blanks_back(s, p - 1), "answer")) consider(*ans);
        }
    }
    // X followed by , . )
    if (boundary_before(s, pos) && end < s.size() && (s[end] == ',' || s[end] == '.' || s[end] == ')')) {
        consider(pos);
    }
    // nothing but X
    {
        const auto first = s.find_first_not_of(" \t\r\n");
        const auto last = s.find_last_not_of(" \t\r\n");
        if (first == pos && last + 1 == end) consider(pos);
    }
    return best;
}

std::optional<std::size_t> text_match_start(std::string_view lowered_output, std::string_view lowered_text) {
    if (lowered_text.empty()) return std::nullopt;
    const bool need_before = is_word(lowered_text.front());
    const bool need_after = is_word(lowered_text.back());
    for (auto pos = lowered_output.find(lowered_text); pos != std::string_view::npos;
         pos = lowered_output.find(lowered_text, pos + 1)) {
        if (need_before && !boundary_before(lowered_output, pos)) continue;
        if (need_after && !boundary_after(lowered_output, pos + lowered_text.size())) continue;
        return pos;
    }
    return std::nullopt;
}

}  // namespace

HeadScheme HeadScheme::letters(std::size_t n) {
    HeadScheme scheme;
    for (std::size_t i = 0; i < n; ++i) {
        std::string label;
        std::size_t v = i;
        do {
            label.insert(label.begin(), static_cast<char>('A' + v % 26));
            v = v / 26;
        } while (v-- > 0);
        scheme.heads.push_back(std::move(label));
    }
    return scheme;
}

void HeadScheme::check_aligned(std::size_t pool_size) const {
    if (heads.size() != pool_size) {
        throw Error(ErrorKind::alignment, "head scheme has " + std::to_string(heads.size()) + " labels for " +
                                              std::to_string(pool_size) + " candidates");
    }
    std::unordered_set<std::string_view> seen;
    for (const auto& h : heads) {
        if (h.empty()) throw Error(ErrorKind::invalid_argument, "empty head label");
        if (!seen.insert(h).second) throw Error(ErrorKind::duplicate_id, "head label '" + h + "' repeats");
    }
}

std::optional<ChoiceMatch> match_choice(std::string_view output, std::span<const std::string> candidate_texts,
                                        const HeadScheme& scheme) {
    scheme.check_aligned(candidate_texts.size());
    std::optional<ChoiceMatch> best;
    auto better = [](const ChoiceMatch& a, std::size_t a_len, const ChoiceMatch& b, std::size_t b_len) {
        if (a.offset != b.offset) return a.offset < b.offset;
        if (a.source != b.source) return a.source == MatchSource::head;
        if (a.source == MatchSource::text && a_len != b_len) return a_len > b_len;
        return a.ordinal < b.ordinal;
    };
    std::size_t best_len = 0;
    auto offer = [&](ChoiceMatch m, std::size_t len) {
        if (!best || better(m, len, *best, best_len)) {
            best = m;
            best_len = len;
        }
    };

    for (std::size_t i = 0; i < scheme.heads.size(); ++i) {
        const std::string& h = scheme.heads[i];
        for (auto pos = output.find(h); pos != std::string_view::npos; pos = output.find(h, pos + 1)) {
            if (auto start = head_pattern_start(output, pos, h.size())) {
                offer({i, *start, MatchSource::head}, h.size());
                break;  // later occurrences of this head start later still
            }
        }
    }
    const std::string lowered = to_lower(output);
    for (std::size_t i = 0; i < candidate_texts.size(); ++i) {
        const std::string text = to_lower(candidate_texts[i]);
        if (auto start = text_match_start(lowered, text)) offer({i, *start, MatchSource::text}, text.size());
    }
    return best;
}

std::optional<std::string> extract_choice(std::string_view output, const CandidatePool& pool,
                                          const HeadScheme& scheme) {
    std::vector<std::string> texts;
    texts.reserve(pool.size());
    for (const auto& c : pool.candidates) texts.push_back(c.text);
    auto m = match_choice(output, texts, scheme);
    if (!m) return std::nullopt;
    return pool.candidates[m->ordinal].id;
}

double decode_accuracy(std::span<const std::string> outputs, std::span<const DecodeItem> items,
                       const std::optional<HeadScheme>& scheme) {
    if (outputs.size() != items.size()) {
        throw Error(ErrorKind::alignment, std::to_string(outputs.size()) + " outputs for " +
                                              std::to_string(items.size()) + " instances");
    }
    if (items.empty()) throw Error(ErrorKind::invalid_argument, "no instances to score");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        const HeadScheme s = scheme ? *scheme : HeadScheme::letters(item.candidate_texts.size());
        auto m = match_choice(outputs[i], item.candidate_texts, s);
        if (!m) continue;
        const auto& id = item.candidate_ids[m->ordinal];
        if (std::find(item.gold.begin(), item.gold.end(), id) != item.gold.end()) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

}  // namespace lgsel
