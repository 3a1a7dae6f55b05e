#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace lgsel::detail {

using json = nlohmann::json;

/// SHA-256 digest of `bytes`, lowercase hex.
std::string sha256_hex(std::string_view bytes);
/// First 8 bytes of the SHA-256 digest, big-endian.
std::uint64_t sha256_u64(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Calls `fn(line_number, object)` for each non-blank line; 1-based line numbers.
/// Lines that are not JSON objects raise parse_error with the line number.
void for_each_json_line(const std::filesystem::path& path,
                        const std::function<void(std::size_t, const json&)>& fn);
void for_each_json_line(std::string_view contents, const std::string& source,
                        const std::function<void(std::size_t, const json&)>& fn);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace lgsel::detail
