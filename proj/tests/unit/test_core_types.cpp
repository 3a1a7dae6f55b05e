#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lgsel/core_types.hpp"
#include "lgsel/error.hpp"
#include "test_support.hpp"

using namespace lgsel;
using lgsel::testing::frame_of;
using lgsel::testing::pool_of;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an lgsel::Error");
    return ErrorKind::io;
}

}  // namespace

TEST_CASE("validate_frame accepts a well-formed frame") {
    const auto f = frame_of({0, 0, 0, 0});
    CHECK(&validate_frame(f) == &f);
}

TEST_CASE("validate_frame rejects dimension mismatch") {
    LogitFrame f = frame_of({0, 0, 0});
    f.vocab_size = 4;
    CHECK(kind_of([&] { validate_frame(f); }) == ErrorKind::dimension_mismatch);

    LogitFrame empty;
    CHECK(kind_of([&] { validate_frame(empty); }) == ErrorKind::dimension_mismatch);
}

TEST_CASE("validate_frame reports the index of a non-finite value") {
    const auto f = frame_of({1.0f, std::numeric_limits<float>::quiet_NaN()});
    try {
        validate_frame(f);
        FAIL("NaN accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::non_finite);
        REQUIRE(e.index());
        CHECK(*e.index() == 1);
    }
    const auto g = frame_of({-std::numeric_limits<float>::infinity(), 0.0f});
    CHECK(kind_of([&] { validate_frame(g); }) == ErrorKind::non_finite);
}

TEST_CASE("validate_frame rejects negative steps") {
    auto f = frame_of({0, 0});
    f.step = -1;
    CHECK(kind_of([&] { validate_frame(f); }) == ErrorKind::negative_step);
}

TEST_CASE("validate_pool accepts a minimal pool") {
    CandidatePool pool = pool_of({{3}, {5}});
    pool.candidates[0].id = "a";
    pool.candidates[1].id = "b";
    CHECK(validate_pool(pool, 10).empty());
}

TEST_CASE("validate_pool error categories") {
    SUBCASE("empty tokens") {
        auto pool = pool_of({{3}, {}});
        CHECK(kind_of([&] { validate_pool(pool, 10); }) == ErrorKind::empty_tokens);
    }
    SUBCASE("duplicate id") {
        auto pool = pool_of({{3}, {4}});
        pool.candidates[1].id = pool.candidates[0].id;
        CHECK(kind_of([&] { validate_pool(pool, 10); }) == ErrorKind::duplicate_id);
    }
    SUBCASE("token id at vocab size") {
        auto pool = pool_of({{3}, {10}});
        CHECK(kind_of([&] { validate_pool(pool, 10); }) == ErrorKind::token_out_of_range);
    }
    SUBCASE("zero mask position is malformed") {
        auto pool = pool_of({{3, 4}, {5}});
        pool.candidates[0].mask = std::vector<std::uint32_t>{0};
        CHECK(kind_of([&] { validate_pool(pool, 10); }) == ErrorKind::malformed_mask);
    }
    SUBCASE("mask past the end") {
        auto pool = pool_of({{3, 4}, {5}});
        pool.candidates[0].mask = std::vector<std::uint32_t>{3};
        CHECK(kind_of([&] { validate_pool(pool, 10); }) == ErrorKind::malformed_mask);
    }
    SUBCASE("repeated mask position") {
        auto pool = pool_of({{3, 4}, {5}});
        pool.candidates[0].mask = std::vector<std::uint32_t>{1, 1};
        CHECK(kind_of([&] { validate_pool(pool, 10); }) == ErrorKind::malformed_mask);
    }
    SUBCASE("empty mask") {
        auto pool = pool_of({{3, 4}, {5}});
        pool.candidates[0].mask = std::vector<std::uint32_t>{};
        CHECK(kind_of([&] { validate_pool(pool, 10); }) == ErrorKind::malformed_mask);
    }
    SUBCASE("single candidate") {
        auto pool = pool_of({{3}});
        CHECK(kind_of([&] { validate_pool(pool, 10); }) == ErrorKind::too_few_candidates);
    }
}

TEST_CASE("duplicate token sequences only warn") {
    auto pool = pool_of({{3, 4}, {5}, {3, 4}});
    const auto warnings = validate_pool(pool, 10);
    REQUIRE(warnings.duplicate_sequences.size() == 1);
    CHECK(warnings.duplicate_sequences[0] == std::vector<std::string>{"c0", "c2"});
}

TEST_CASE("Method parsing mirrors the command-line names") {
    CHECK(Method::parse("first") == Method::first());
    CHECK(Method::parse("sample-average") == Method::sample_average());
    CHECK(Method::parse("kth", 3) == Method::kth(3));
    CHECK(Method::parse("kth", 3).label() == "kth(3)");
    CHECK(kind_of([] { Method::parse("kth"); }) == ErrorKind::invalid_argument);
    CHECK(kind_of([] { Method::parse("first", 2); }) == ErrorKind::invalid_argument);
    CHECK(kind_of([] { Method::parse("median"); }) == ErrorKind::invalid_argument);
    CHECK(kind_of([] { Method::kth(0); }) == ErrorKind::invalid_argument);
    for (const auto& m : Method::all_kinds(2)) CHECK(Method::parse(m.name(), m.kind == Method::Kind::kth ? std::optional<std::uint32_t>(2) : std::nullopt) == m);
}

TEST_CASE("error classes drive exit codes") {
    CHECK(classify(ErrorKind::transport) == ErrorClass::provider);
    CHECK(classify(ErrorKind::step_mismatch) == ErrorClass::provider);
    CHECK(classify(ErrorKind::non_finite) == ErrorClass::data);
    const Error e(ErrorKind::duplicate_id, "x", 3, "id7");
    CHECK(std::string(e.what()) == "duplicate-id: x");
    CHECK(e.subject() == "id7");
}

TEST_CASE("validation is total: corrupted inputs pass or raise exactly one categorized error") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> pick(0, 9);
    int passed = 0, rejected = 0;
    for (int t = 0; t < 2000; ++t) {
        auto frame = lgsel::testing::random_frame(rng, 20);
        auto pool = lgsel::testing::random_pool(rng, 2 + t % 4, 24, 0, 4, t % 2 == 0);
        switch (pick(rng)) {
            case 0: frame.values.pop_back(); break;
            case 1: frame.values[t % 19] = std::numeric_limits<float>::infinity(); break;
            case 2: frame.step = -1 - t % 3; break;
            case 3: pool.candidates.back().id = pool.candidates.front().id; break;
            case 4: if (pool.candidates[0].mask) pool.candidates[0].mask->push_back(0); break;
            case 5: pool.candidates.resize(1); break;
            default: break;
        }
        int outcomes = 0;
        try {
            validate_frame(frame);
            validate_pool(pool, frame.vocab_size);
            ++outcomes;
            ++passed;
        } catch (const Error&) {
            ++outcomes;
            ++rejected;
        }
        CHECK(outcomes == 1);
    }
    CHECK(passed > 0);
    CHECK(rejected > 0);
}
