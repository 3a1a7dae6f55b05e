#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lgsel/error.hpp"
#include "lgsel/providers.hpp"
#include "lgsel/scoring.hpp"
#include "test_support.hpp"

using namespace lgsel;
using lgsel::testing::frame_of;
using lgsel::testing::TempDir;

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

// Byte-by-byte LGTS writer that does not share code with the library.
std::string hand_lgts(std::uint32_t vocab, std::uint32_t step, const std::vector<float>& values) {
    std::string s = "LGTS";
    const unsigned char header[] = {1, 0, 0, 0,
                                    static_cast<unsigned char>(vocab), static_cast<unsigned char>(vocab >> 8),
                                    static_cast<unsigned char>(vocab >> 16), static_cast<unsigned char>(vocab >> 24),
                                    static_cast<unsigned char>(step), static_cast<unsigned char>(step >> 8),
                                    static_cast<unsigned char>(step >> 16), static_cast<unsigned char>(step >> 24)};
    s.append(reinterpret_cast<const char*>(header), sizeof header);
    for (float f : values) {
        const auto u = std::bit_cast<std::uint32_t>(f);
        for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    }
    return s;
}

class TestServer {
public:
    explicit TestServer(httplib::Server::Handler handler) {
        server_.Post("/v1/logits", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~TestServer() {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_CASE("LGTS round-trip is bit-exact") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 50; ++t) {
        auto f = lgsel::testing::random_frame(rng, 1 + t * 97, 10.0);
        f.step = t;
        const auto bytes = encode_lgts(f);
        CHECK(bytes.size() == 16 + 4 * f.values.size());
        const auto g = decode_lgts(bytes);
        CHECK(g.vocab_size == f.vocab_size);
        CHECK(g.step == f.step);
        REQUIRE(g.values.size() == f.values.size());
        CHECK(std::memcmp(g.values.data(), f.values.data(), 4 * f.values.size()) == 0);
        CHECK(encode_lgts(g) == bytes);
    }
}

TEST_CASE("LGTS layout matches a hand-built encoding") {
    const std::vector<float> values{1.0f, -2.5f, 0.0f, 3.25e-5f};
    const auto bytes = hand_lgts(4, 7, values);
    CHECK(encode_lgts(frame_of(values, 7)) == bytes);
    const auto f = decode_lgts(bytes);
    CHECK(f.values == values);
    CHECK(f.step == 7);
    // 1.0f is 0x3f800000, stored little-endian
    CHECK(bytes.substr(16, 4) == std::string("\x00\x00\x80\x3f", 4));
}

TEST_CASE("LGTS decode errors") {
    const auto good = hand_lgts(3, 0, {1, 2, 3});
    CHECK(kind_of([&] { decode_lgts("LGTX" + good.substr(4)); }) == ErrorKind::bad_magic);
    CHECK(kind_of([&] { decode_lgts("XXXX" + good.substr(4)); }) == ErrorKind::bad_magic);
    CHECK(kind_of([&] { decode_lgts(""); }) == ErrorKind::bad_magic);
    CHECK(kind_of([&] { decode_lgts(good.substr(0, 10)); }) == ErrorKind::truncated);
    CHECK(kind_of([&] { decode_lgts(good.substr(0, good.size() - 1)); }) == ErrorKind::truncated);
    CHECK(kind_of([&] { decode_lgts(good + "x"); }) == ErrorKind::trailing_bytes);
    std::string v2 = good;
    v2[4] = 2;
    CHECK(kind_of([&] { decode_lgts(v2); }) == ErrorKind::version_mismatch);
    CHECK(kind_of([&] { decode_lgts(hand_lgts(2, 0, {1, NAN})); }) == ErrorKind::non_finite);
    CHECK(kind_of([&] { decode_lgts(hand_lgts(0, 0, {})); }) == ErrorKind::dimension_mismatch);
}

TEST_CASE("frame files in both forms") {
    TempDir dir;
    const auto f = frame_of({0.5f, -1.0f, 2.0f}, 3);
    write_lgts(f, dir / "a.lgts");
    const auto a = read_frame_file(dir / "a.lgts");
    CHECK(a.values == f.values);
    CHECK(a.provenance == "a.lgts");
    const auto b = read_frame_file(dir.write("b.json", to_readable_frame(f)));
    CHECK(b.values == f.values);
    CHECK(b.step == 3);
    CHECK(kind_of([&] { read_frame_file(dir.write("c.json", R"({"vocab_size":2,"step":0,"values":[1,null]})")); }) ==
          ErrorKind::non_finite);
    CHECK(kind_of([&] { read_frame_file(dir.write("d.json", R"({"vocab_size":3,"step":0,"values":[1,2]})")); }) ==
          ErrorKind::dimension_mismatch);
    CHECK(kind_of([&] { read_frame_file(dir.write("e.json", R"({"vocab_size":1,"step":-1,"values":[1]})")); }) ==
          ErrorKind::negative_step);

    FileProvider provider(dir.path());
    CHECK(provider.get_frame(FrameRequest{"a.lgts", 0, false}).values == f.values);
    CHECK(provider.get_frame(FrameRequest{"a.lgts", 0, false}) == provider.get_frame(FrameRequest{"a.lgts", 0, false}));
    write_lgts(frame_of({0, 0, 0, 0}), dir / "zeros.lgts");
    const auto z = read_frame_file(dir / "zeros.lgts");
    CHECK(z.vocab_size == 4);
    CHECK(z.step == 0);
    CHECK(z.values == std::vector<float>(4, 0.0f));
    CHECK(kind_of([&] { provider.get_frame(FrameRequest{"missing.lgts", 0, false}); }) == ErrorKind::io);
}

TEST_CASE("stub provider is deterministic and keyed by the request") {
    StubProvider a(1000, 42), b(1000, 42), c(1000, 43);
    const auto fa = a.get_frame({"q", 0, false});
    CHECK(fa == b.get_frame({"q", 0, false}));
    CHECK(fa.values != c.get_frame({"q", 0, false}).values);
    CHECK(fa.values != a.get_frame({"q", 1, false}).values);
    CHECK(fa.values != a.get_frame({"q", 0, true}).values);
    CHECK(fa.values != a.get_frame({"r", 0, false}).values);
    CHECK(fa.vocab_size == 1000);
    CHECK_NOTHROW(validate_frame(fa));
    CHECK(kind_of([&] { a.get_frame({"q", -1, false}); }) == ErrorKind::negative_step);

    // roughly standard normal
    StubProvider big(200000, 7);
    const auto f = big.get_frame({"stats", 0, false});
    double mean = 0, sq = 0;
    for (float v : f.values) {
        mean += v;
        sq += static_cast<double>(v) * v;
    }
    mean /= f.values.size();
    const double var = sq / f.values.size() - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("stub frames give chance-level accuracy on 4-option pools") {
    StubProvider stub(64, 2024);
    const auto pool = lgsel::testing::pool_of({{3}, {17}, {29}, {41}});
    int hits = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        const auto f = stub.get_frame({"prompt " + std::to_string(i), 0, false});
        if (top_k(score_pool(f, pool, Method::first()), pool, 1).entries[0].ordinal == 0) ++hits;
    }
    CHECK(std::abs(100.0 * hits / n - 25.0) <= 3.0);
}

TEST_CASE("HTTP provider") {
    const auto frame = frame_of({0.25f, -1.5f, 3.0f, 0.0f});

    SUBCASE("conforming response") {
        std::atomic<int> calls{0};
        TestServer server([&](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body);
            CHECK(body.at("prompt") == "hello");
            CHECK(body.at("template") == true);
            ++calls;
            auto f = frame;
            f.step = body.at("step").get<std::int64_t>();
            res.set_content(encode_http_response(f), "application/json");
        });
        HttpProvider http({server.endpoint(), 2, std::chrono::milliseconds(5000)});
        const auto got = http.get_frame({"hello", 4, true});
        CHECK(got.values == frame.values);
        CHECK(got.step == 4);
        CHECK(calls == 1);
        // concurrent requests with a bounded number in flight
        std::vector<std::jthread> threads;
        for (int i = 0; i < 6; ++i) {
            threads.emplace_back([&] { CHECK(http.get_frame({"hello", 1, true}).values == frame.values); });
        }
        threads.clear();
        CHECK(calls == 7);
    }
    SUBCASE("step mismatch") {
        TestServer server([&](const httplib::Request&, httplib::Response& res) {
            res.set_content(encode_http_response(frame), "application/json");
        });
        HttpProvider http({server.endpoint(), 1, std::chrono::milliseconds(5000)});
        CHECK(kind_of([&] { http.get_frame({"x", 2, false}); }) == ErrorKind::step_mismatch);
    }
    SUBCASE("schema violations") {
        TestServer server([&](const httplib::Request& req, httplib::Response& res) {
            const auto prompt = nlohmann::json::parse(req.body).at("prompt").get<std::string>();
            auto obj = nlohmann::json::parse(encode_http_response(frame));
            if (prompt == "dtype") obj["dtype"] = "f16";
            if (prompt == "size") obj["vocab_size"] = 5;
            if (prompt == "b64") obj["logits_b64"] = "!!!";
            if (prompt == "missing") obj.erase("logits_b64");
            if (prompt == "nan") {
                auto f = frame;
                f.values[1] = NAN;
                obj = nlohmann::json::parse(encode_http_response(f));
            }
            res.set_content(prompt == "text" ? std::string("not json") : obj.dump(), "application/json");
        });
        HttpProvider http({server.endpoint(), 1, std::chrono::milliseconds(5000)});
        for (const char* p : {"dtype", "size", "b64", "missing", "nan", "text"}) {
            CAPTURE(p);
            CHECK(kind_of([&] { http.get_frame({p, 0, false}); }) == ErrorKind::schema);
        }
    }
    SUBCASE("HTTP error status") {
        TestServer server([&](const httplib::Request&, httplib::Response& res) {
            res.status = 500;
            res.set_content("boom", "text/plain");
        });
        HttpProvider http({server.endpoint(), 1, std::chrono::milliseconds(5000)});
        CHECK(kind_of([&] { http.get_frame({"x", 0, false}); }) == ErrorKind::http_status);
    }
    SUBCASE("transport failure") {
        const int port = lgsel::testing::unused_port();
        HttpProvider http({"http://127.0.0.1:" + std::to_string(port), 1, std::chrono::milliseconds(2000)});
        const auto kind = kind_of([&] { http.get_frame({"x", 0, false}); });
        CHECK(kind == ErrorKind::transport);
        CHECK(classify(kind) == ErrorClass::provider);
    }
    SUBCASE("static decoder") {
        CHECK(HttpProvider::decode_response(encode_http_response(frame), 0).values == frame.values);
        CHECK(kind_of([&] { HttpProvider(HttpProviderOptions{}); }) == ErrorKind::invalid_argument);
    }
}
