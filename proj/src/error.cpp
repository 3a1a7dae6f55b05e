#include "lgsel/error.hpp"

namespace lgsel {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::dimension_mismatch: return "dimension-mismatch";
        case ErrorKind::non_finite: return "non-finite";
        case ErrorKind::negative_step: return "negative-step";
        case ErrorKind::empty_tokens: return "empty-tokens";
        case ErrorKind::duplicate_id: return "duplicate-id";
        case ErrorKind::token_out_of_range: return "token-out-of-range";
        case ErrorKind::malformed_mask: return "malformed-mask";
        case ErrorKind::too_few_candidates: return "too-few-candidates";
        case ErrorKind::kth_out_of_range: return "kth-out-of-range";
        case ErrorKind::missing_mask: return "missing-mask";
        case ErrorKind::unknown_id: return "unknown-id";
        case ErrorKind::empty_mask: return "empty-mask";
        case ErrorKind::position_out_of_range: return "position-out-of-range";
        case ErrorKind::parse_error: return "parse-error";
        case ErrorKind::version_mismatch: return "version-mismatch";
        case ErrorKind::fingerprint_missing: return "fingerprint-missing";
        case ErrorKind::malformed_record: return "malformed-record";
        case ErrorKind::bad_magic: return "bad-magic";
        case ErrorKind::truncated: return "truncated";
        case ErrorKind::trailing_bytes: return "trailing-bytes";
        case ErrorKind::alignment: return "alignment";
        case ErrorKind::too_many_failures: return "too-many-failures";
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::io: return "io";
        case ErrorKind::transport: return "transport";
        case ErrorKind::http_status: return "http-status";
        case ErrorKind::schema: return "schema";
        case ErrorKind::step_mismatch: return "step-mismatch";
    }
    return "unknown";
}

ErrorClass classify(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::transport:
        case ErrorKind::http_status:
        case ErrorKind::schema:
        case ErrorKind::step_mismatch:
            return ErrorClass::provider;
        default:
            return ErrorClass::data;
    }
}

Error::Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> index,
             std::string subject)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      index_(index),
      subject_(std::move(subject)) {}

}  // namespace lgsel
