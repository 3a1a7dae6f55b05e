#include "lgsel/providers.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <random>

#include <httplib.h>

#include "detail/util.hpp"
#include "lgsel/error.hpp"

namespace lgsel {
namespace {

using detail::json;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(std::string_view b, std::size_t at) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                      (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t get_u32(std::string_view b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[at + static_cast<std::size_t>(i)]);
    return v;
}

std::string pack_f32le(const std::vector<float>& values) {
    std::string out;
    out.reserve(values.size() * 4);
    for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

std::vector<float> unpack_f32le(std::string_view bytes, std::size_t count, std::size_t offset = 0) {
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(get_u32(bytes, offset + 4 * i));
    return values;
}

// Uniform in the open interval (0, 1) from the top 53 bits.
double open_unit(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

// ---------------------------------------------------------------------------
// Wire formats

std::string encode_lgts(const LogitFrame& frame) {
    validate_frame(frame);
    if (frame.step > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorKind::invalid_argument, "step does not fit in u32");
    }
    std::string out;
    out.reserve(kLgtsHeaderSize + 4 * frame.values.size());
    out += "LGTS";
    put_u16(out, kLgtsVersion);
    put_u16(out, 0);
    put_u32(out, frame.vocab_size);
    put_u32(out, static_cast<std::uint32_t>(frame.step));
    out += pack_f32le(frame.values);
    return out;
}

LogitFrame decode_lgts(std::string_view bytes) {
    if (bytes.size() < 4 || bytes.substr(0, 4) != "LGTS") {
        throw Error(ErrorKind::bad_magic, "frame does not start with LGTS magic");
    }
    if (bytes.size() < kLgtsHeaderSize) {
        throw Error(ErrorKind::truncated, "LGTS header is " + std::to_string(bytes.size()) + " bytes, need 16");
    }
    const auto version = get_u16(bytes, 4);
    if (version != kLgtsVersion) {
        throw Error(ErrorKind::version_mismatch, "LGTS version " + std::to_string(version) + " is not supported");
    }
    const auto flags = get_u16(bytes, 6);
    if (flags != 0) {
        throw Error(ErrorKind::version_mismatch, "LGTS flags " + std::to_string(flags) + " are not supported");
    }
    LogitFrame frame;
    frame.vocab_size = get_u32(bytes, 8);
    frame.step = get_u32(bytes, 12);
    const std::size_t payload = static_cast<std::size_t>(frame.vocab_size) * 4;
    const std::size_t available = bytes.size() - kLgtsHeaderSize;
    if (available < payload) {
        throw Error(ErrorKind::truncated, "LGTS payload has " + std::to_string(available) + " bytes, need " +
                                              std::to_string(payload));
    }
    if (available > payload) {
        throw Error(ErrorKind::trailing_bytes,
                    std::to_string(available - payload) + " bytes follow the LGTS payload");
    }
    frame.values = unpack_f32le(bytes, frame.vocab_size, kLgtsHeaderSize);
    validate_frame(frame);
    return frame;
}

void write_lgts(const LogitFrame& frame, const std::filesystem::path& path) {
    detail::write_file(path, encode_lgts(frame));
}

LogitFrame parse_readable_frame(std::string_view text) {
    json obj;
    try {
        obj = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::parse_error, std::string("readable frame: ") + e.what());
    }
    auto vs = obj.find("vocab_size");
    auto st = obj.find("step");
    auto vals = obj.find("values");
    if (!obj.is_object() || vs == obj.end() || !vs->is_number_unsigned() || st == obj.end() ||
        !st->is_number_integer() || vals == obj.end() || !vals->is_array()) {
        throw Error(ErrorKind::parse_error, "readable frame needs vocab_size, step and values");
    }
    LogitFrame frame;
    frame.vocab_size = vs->get<std::uint32_t>();
    frame.step = st->get<std::int64_t>();
    frame.values.reserve(vals->size());
    for (std::size_t i = 0; i < vals->size(); ++i) {
        const auto& v = (*vals)[i];
        if (v.is_number()) {
            frame.values.push_back(v.get<float>());
        } else {
            // null is how JSON writers emit NaN/Inf
            throw Error(ErrorKind::non_finite, "value at index " + std::to_string(i) + " is not a finite number", i);
        }
    }
    if (auto p = obj.find("provenance"); p != obj.end() && p->is_string()) frame.provenance = p->get<std::string>();
    validate_frame(frame);
    return frame;
}

std::string to_readable_frame(const LogitFrame& frame) {
    nlohmann::ordered_json obj;
    obj["vocab_size"] = frame.vocab_size;
    obj["step"] = frame.step;
    obj["values"] = frame.values;
    if (!frame.provenance.empty()) obj["provenance"] = frame.provenance;
    return obj.dump();
}

LogitFrame read_frame_file(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file(path);
    const auto first = bytes.find_first_not_of(" \t\r\n");
    LogitFrame frame = (first != std::string::npos && bytes[first] == '{') ? parse_readable_frame(bytes)
                                                                           : decode_lgts(bytes);
    if (frame.provenance.empty()) frame.provenance = path.filename().string();
    return frame;
}

// ---------------------------------------------------------------------------
// FileProvider

LogitFrame FileProvider::get_frame(const std::filesystem::path& path) const {
    return read_frame_file(path.is_absolute() || base_dir_.empty() ? path : base_dir_ / path);
}

LogitFrame FileProvider::get_frame(const FrameRequest& request) {
    return get_frame(std::filesystem::path(request.prompt));
}

// ---------------------------------------------------------------------------
// HttpProvider

HttpProvider::HttpProvider(HttpProviderOptions options)
    : options_(std::move(options)),
      slots_(std::make_unique<std::counting_semaphore<>>(
          static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options_.max_in_flight)))) {
    if (options_.endpoint.empty()) throw Error(ErrorKind::invalid_argument, "HTTP provider needs an endpoint");
}

LogitFrame HttpProvider::decode_response(std::string_view body, std::int64_t expected_step) {
    json obj;
    try {
        obj = json::parse(body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::schema, std::string("response is not JSON: ") + e.what());
    }
    auto vs = obj.find("vocab_size");
    auto st = obj.find("step");
    auto dt = obj.find("dtype");
    auto lb = obj.find("logits_b64");
    if (!obj.is_object() || vs == obj.end() || !vs->is_number_unsigned() || st == obj.end() ||
        !st->is_number_integer() || lb == obj.end() || !lb->is_string()) {
        throw Error(ErrorKind::schema, "response needs vocab_size, step, dtype and logits_b64");
    }
    if (dt == obj.end() || *dt != "f32le") throw Error(ErrorKind::schema, "response dtype must be \"f32le\"");
    if (vs->get<std::uint64_t>() > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorKind::schema, "response vocab_size exceeds u32");
    }
    const auto step = st->get<std::int64_t>();
    if (step != expected_step) {
        throw Error(ErrorKind::step_mismatch,
                    "requested step " + std::to_string(expected_step) + ", server returned " + std::to_string(step));
    }
    const std::string payload = detail::base64_decode(lb->get_ref<const std::string&>());
    LogitFrame frame;
    frame.vocab_size = vs->get<std::uint32_t>();
    frame.step = step;
    if (payload.size() != static_cast<std::size_t>(frame.vocab_size) * 4) {
        throw Error(ErrorKind::schema, "vocab_size " + std::to_string(frame.vocab_size) + " does not match " +
                                           std::to_string(payload.size()) + " payload bytes");
    }
    frame.values = unpack_f32le(payload, frame.vocab_size);
    try {
        validate_frame(frame);
    } catch (const Error& e) {
        throw Error(ErrorKind::schema, std::string("response frame invalid: ") + e.what(), e.index());
    }
    return frame;
}

LogitFrame HttpProvider::get_frame(const FrameRequest& request) {
    if (request.step < 0) throw Error(ErrorKind::negative_step, "request step is negative");
    slots_->acquire();
    struct Release {
        std::counting_semaphore<>* s;
        ~Release() { s->release(); }
    } release{slots_.get()};

    httplib::Client client(options_.endpoint);
    if (!client.is_valid()) throw Error(ErrorKind::transport, "invalid endpoint '" + options_.endpoint + "'");
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());

    json body;
    body["prompt"] = request.prompt;
    body["step"] = request.step;
    body["template"] = request.use_template;
    auto res = client.Post("/v1/logits", body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorKind::transport,
                    "POST " + options_.endpoint + "/v1/logits failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorKind::http_status, "server answered HTTP " + std::to_string(res->status));
    }
    LogitFrame frame = decode_response(res->body, request.step);
    frame.provenance = describe();
    return frame;
}

std::string encode_http_response(const LogitFrame& frame) {
    nlohmann::ordered_json obj;
    obj["vocab_size"] = frame.vocab_size;
    obj["step"] = frame.step;
    obj["dtype"] = "f32le";
    obj["logits_b64"] = detail::base64_encode(pack_f32le(frame.values));
    return obj.dump();
}

// ---------------------------------------------------------------------------
// StubProvider

StubProvider::StubProvider(std::uint32_t vocab_size, std::uint64_t seed) : vocab_size_(vocab_size), seed_(seed) {
    if (vocab_size == 0) throw Error(ErrorKind::invalid_argument, "stub provider needs vocab_size >= 1");
}

std::string StubProvider::describe() const {
    return "stub(seed=" + std::to_string(seed_) + ",vocab=" + std::to_string(vocab_size_) + ")";
}

LogitFrame StubProvider::get_frame(const FrameRequest& request) {
    if (request.step < 0) throw Error(ErrorKind::negative_step, "request step is negative");
    std::string key = std::to_string(seed_) + '\x1f' + std::to_string(request.step) + '\x1f' +
                      (request.use_template ? "T" : "F") + '\x1f' + request.prompt;
    std::mt19937_64 rng(detail::sha256_u64(key));

    LogitFrame frame;
    frame.vocab_size = vocab_size_;
    frame.step = request.step;
    frame.provenance = describe();
    frame.values.resize(vocab_size_);
    // Box-Muller; written out so the stream is identical on every standard library.
    for (std::size_t i = 0; i < frame.values.size(); i += 2) {
        const double r = std::sqrt(-2.0 * std::log(open_unit(rng())));
        const double theta = 2.0 * std::numbers::pi * open_unit(rng());
        frame.values[i] = static_cast<float>(r * std::cos(theta));
        if (i + 1 < frame.values.size()) frame.values[i + 1] = static_cast<float>(r * std::sin(theta));
    }
    return frame;
}

}  // namespace lgsel
