#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "lgsel/decode_map.hpp"
#include "lgsel/error.hpp"
#include "test_support.hpp"

using namespace lgsel;

namespace {

struct CorpusRow {
    std::string output;
    std::vector<std::string> candidates;
    std::optional<std::string> expected;  // head label
};

std::vector<CorpusRow> load_corpus() {
    std::ifstream in(lgsel::testing::data_dir() / "mapping_corpus.jsonl");
    REQUIRE(in);
    std::vector<CorpusRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        CorpusRow r{j.at("output"), j.at("candidates"), std::nullopt};
        if (!j.at("expected").is_null()) r.expected = j.at("expected").get<std::string>();
        rows.push_back(std::move(r));
    }
    return rows;
}

std::optional<std::string> label_of(const CorpusRow& row, std::string_view output) {
    const auto scheme = HeadScheme::letters(row.candidates.size());
    const auto m = match_choice(output, row.candidates, scheme);
    if (!m) return std::nullopt;
    return scheme.heads[m->ordinal];
}

}  // namespace

TEST_CASE("head letters") {
    const auto h = HeadScheme::letters(28).heads;
    CHECK(h.front() == "A");
    CHECK(h[25] == "Z");
    CHECK(h[26] == "AA");
    CHECK(h[27] == "AB");
    CHECK(HeadScheme::letters(703).heads.back() == "AAA");
}

TEST_CASE("labeled mapping corpus") {
    const auto rows = load_corpus();
    REQUIRE(rows.size() >= 20);
    for (const auto& row : rows) {
        CAPTURE(row.output);
        CHECK(label_of(row, row.output) == row.expected);
    }
}

TEST_CASE("earliest match is stable under unrelated prefixes and suffixes") {
    const std::string prefix = "Well, let me think about it. ";
    const std::string suffix = " Thanks for asking!";
    for (const auto& row : load_corpus()) {
        const auto heads = HeadScheme::letters(row.candidates.size()).heads;
        const auto first = row.output.find_first_not_of(" \t\r\n");
        const auto last = row.output.find_last_not_of(" \t\r\n");
        const bool bare_head = first != std::string::npos &&
                               std::count(heads.begin(), heads.end(), row.output.substr(first, last - first + 1)) > 0;
        if (bare_head) continue;  // a lone label stops being one once text is added
        CAPTURE(row.output);
        CHECK(label_of(row, prefix + row.output) == row.expected);
        CHECK(label_of(row, row.output + suffix) == row.expected);
    }
}

TEST_CASE("prepending an earlier valid match takes over") {
    for (const auto& row : load_corpus()) {
        if (row.candidates.size() < 5) continue;
        CAPTURE(row.output);
        CHECK(label_of(row, "Answer: E. " + row.output) == std::optional<std::string>("E"));
        CHECK(label_of(row, "(A) " + row.output) == std::optional<std::string>("A"));
    }
}

TEST_CASE("typical phrasings") {
    const std::vector<std::string> cands{"one", "two", "three", "four", "five"};
    const auto scheme = HeadScheme::letters(5);
    CHECK(match_choice("The correct answer is (B).", cands, scheme)->ordinal == 1);
    CHECK(match_choice("A and B both plausible, but A.", cands, scheme)->ordinal == 0);
    CHECK_FALSE(match_choice("no idea", cands, scheme));
}

TEST_CASE("match offsets and sources") {
    const std::vector<std::string> cands{"race track", "populated areas"};
    const auto scheme = HeadScheme::letters(2);
    auto m = match_choice("so the answer is (B).", cands, scheme);
    REQUIRE(m);
    CHECK(m->offset == 7);
    CHECK(m->source == MatchSource::head);
    m = match_choice("maybe a race track", cands, scheme);
    REQUIRE(m);
    CHECK(m->ordinal == 0);
    CHECK(m->offset == 8);
    CHECK(m->source == MatchSource::text);
    CHECK_FALSE(match_choice("", cands, scheme));
}

TEST_CASE("custom head schemes") {
    const std::vector<std::string> cands{"red", "green", "blue"};
    const HeadScheme digits{{"1", "2", "3"}};
    auto m = match_choice("Option 2, because it is bright.", cands, digits);
    REQUIRE(m);
    CHECK(m->ordinal == 1);
    CHECK_FALSE(match_choice("Option 12, maybe.", cands, digits));

    CHECK_THROWS_AS(match_choice("x", cands, HeadScheme{{"1", "2"}}), Error);
    try {
        match_choice("x", cands, HeadScheme{{"1", "2"}});
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::alignment);
    }
}

TEST_CASE("extract_choice returns candidate ids") {
    auto pool = lgsel::testing::pool_of({{1}, {2}, {3}});
    pool.candidates[0].text = "cat";
    pool.candidates[1].text = "dog";
    pool.candidates[2].text = "cow";
    CHECK(extract_choice("Answer: C", pool, HeadScheme::letters(3)) == "c2");
    CHECK(extract_choice("a dog, I think", pool, HeadScheme::letters(3)) == "c1");
    CHECK(extract_choice("nothing", pool, HeadScheme::letters(3)) == std::nullopt);
}

TEST_CASE("decode accuracy on a small labeled set") {
    const std::vector<std::string> texts{"race track", "populated areas", "the desert"};
    const std::vector<std::string> ids{"a", "b", "c"};
    std::vector<DecodeItem> items;
    for (const char* g : {"a", "b", "c", "a"}) items.push_back({ids, texts, {g}});
    const std::vector<std::string> outputs{"(A)", "populated areas", "the answer is (A)", "no idea"};
    CHECK(decode_accuracy(outputs, items) == doctest::Approx(0.5));
    CHECK_THROWS_AS(decode_accuracy(std::span(outputs).first(3), items), Error);

    const std::vector<std::string> all_right{"Answer: A", "Answer: B", "Answer: C", "Answer: A"};
    CHECK(decode_accuracy(all_right, items) == 1.0);
    const std::vector<std::string> no_idea(4, "no idea");
    CHECK(decode_accuracy(no_idea, items) == 0.0);
}
