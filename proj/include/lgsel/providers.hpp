#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include "lgsel/core_types.hpp"

namespace lgsel {

// ---------------------------------------------------------------------------
// LGTS binary frame, all fields little-endian:
//   0..3   magic "LGTS"
//   4..5   version (u16) = 1
//   6..7   flags   (u16) = 0
//   8..11  vocab_size (u32)
//   12..15 step (u32)
//   16..   vocab_size binary32 values, no trailing bytes

inline constexpr std::uint16_t kLgtsVersion = 1;
inline constexpr std::size_t kLgtsHeaderSize = 16;

std::string encode_lgts(const LogitFrame& frame);
/// Decodes and validates. Errors: bad_magic, version_mismatch, truncated, trailing_bytes.
LogitFrame decode_lgts(std::string_view bytes);

void write_lgts(const LogitFrame& frame, const std::filesystem::path& path);

/// Readable form `{"vocab_size":N,"step":S,"values":[...]}`, for tests and small cases.
LogitFrame parse_readable_frame(std::string_view text);
std::string to_readable_frame(const LogitFrame& frame);

/// Reads a frame file in either form; the first four bytes decide which.
LogitFrame read_frame_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct FrameRequest {
    std::string prompt;
    std::int64_t step = 0;
    bool use_template = false;
};

/// Source of logit frames for prompts. Implementations tolerate concurrent calls.
class FrameProvider {
public:
    virtual ~FrameProvider() = default;
    virtual LogitFrame get_frame(const FrameRequest& request) = 0;
    virtual std::string describe() const = 0;
};

/// Frames on disk. A request's prompt is interpreted as a path.
class FileProvider final : public FrameProvider {
public:
    explicit FileProvider(std::filesystem::path base_dir = {}) : base_dir_(std::move(base_dir)) {}

    LogitFrame get_frame(const std::filesystem::path& path) const;
    LogitFrame get_frame(const FrameRequest& request) override;
    std::string describe() const override { return "file"; }

private:
    std::filesystem::path base_dir_;
};

struct HttpProviderOptions {
    std::string endpoint;  // e.g. "http://127.0.0.1:8080"
    std::size_t max_in_flight = 8;
    std::chrono::milliseconds timeout{30000};
};

/// POST /v1/logits client. Response logits arrive base64-encoded as f32le.
class HttpProvider final : public FrameProvider {
public:
    explicit HttpProvider(HttpProviderOptions options);

    LogitFrame get_frame(const FrameRequest& request) override;
    std::string describe() const override { return "http:" + options_.endpoint; }

    /// Decodes a response body; exposed for tests.
    static LogitFrame decode_response(std::string_view body, std::int64_t expected_step);

private:
    HttpProviderOptions options_;
    std::unique_ptr<std::counting_semaphore<>> slots_;
};

/// Encodes a frame as an HTTP response body (used by test servers and tools).
std::string encode_http_response(const LogitFrame& frame);

/// Deterministic pseudo-random frames with i.i.d. standard normal values.
/// The stream is keyed by (seed, prompt, step, template), so every distinct
/// request gets its own frame and identical requests get identical frames.
class StubProvider final : public FrameProvider {
public:
    StubProvider(std::uint32_t vocab_size, std::uint64_t seed);

    LogitFrame get_frame(const FrameRequest& request) override;
    std::string describe() const override;

    std::uint32_t vocab_size() const noexcept { return vocab_size_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint32_t vocab_size_;
    std::uint64_t seed_;
};

}  // namespace lgsel
