#include "swag/error.hpp"

namespace swag {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::precondition_violation: return "PreconditionViolation";
    case Errc::empty_after_normalization: return "EmptyAfterNormalization";
    case Errc::no_match: return "NoMatch";
    case Errc::unresolved_action: return "UnresolvedAction";
    case Errc::auth_error: return "AuthError";
    case Errc::rate_limited: return "RateLimited";
    case Errc::transport_error: return "TransportError";
    case Errc::http_status: return "HttpStatus";
    case Errc::malformed_response: return "MalformedResponse";
    case Errc::script_exhausted: return "ScriptExhausted";
    case Errc::unknown_fingerprint: return "UnknownFingerprint";
    case Errc::insufficient_dominant_records: return "InsufficientDominantRecords";
    case Errc::insufficient_records: return "InsufficientRecords";
    case Errc::non_finite_input: return "NonFiniteInput";
    case Errc::empty_batch: return "EmptyBatch";
    case Errc::mixed_opponents: return "MixedOpponents";
    case Errc::parse_error: return "ParseError";
    case Errc::config_error: return "ConfigError";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

std::optional<Errc> parse_errc(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(Errc::io_error); ++i) {
    auto code = static_cast<Errc>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

}  // namespace swag
