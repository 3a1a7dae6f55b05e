#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace lgsel {

enum class ErrorKind {
    // data / validation
    dimension_mismatch,
    non_finite,
    negative_step,
    empty_tokens,
    duplicate_id,
    token_out_of_range,
    malformed_mask,
    too_few_candidates,
    kth_out_of_range,
    missing_mask,
    unknown_id,
    empty_mask,
    position_out_of_range,
    parse_error,
    version_mismatch,
    fingerprint_missing,
    malformed_record,
    bad_magic,
    truncated,
    trailing_bytes,
    alignment,
    too_many_failures,
    invalid_argument,
    io,
    // provider / transport
    transport,
    http_status,
    schema,
    step_mismatch,
};

/// Coarse grouping used for CLI exit codes.
enum class ErrorClass { data, provider };

const char* to_string(ErrorKind kind) noexcept;
ErrorClass classify(ErrorKind kind) noexcept;

/// The single exception type raised by the library. Each failure carries exactly
/// one kind; `index` locates offending values (frame index, file line) and
/// `subject` names the offending record (candidate id, instance id).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> index = std::nullopt,
          std::string subject = {});

    ErrorKind kind() const noexcept { return kind_; }
    ErrorClass error_class() const noexcept { return classify(kind_); }
    const std::optional<std::size_t>& index() const noexcept { return index_; }
    const std::string& subject() const noexcept { return subject_; }

private:
    ErrorKind kind_;
    std::optional<std::size_t> index_;
    std::string subject_;
};

}  // namespace lgsel
