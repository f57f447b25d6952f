#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace swag {

enum class Errc {
  invalid_argument,
  precondition_violation,
  empty_after_normalization,
  no_match,
  unresolved_action,
  auth_error,
  rate_limited,
  transport_error,
  http_status,
  malformed_response,
  script_exhausted,
  unknown_fingerprint,
  insufficient_dominant_records,
  insufficient_records,
  non_finite_input,
  empty_batch,
  mixed_opponents,
  parse_error,
  config_error,
  io_error,
};

std::string_view to_string(Errc code) noexcept;

/// Inverse of to_string; nullopt for unknown names.
std::optional<Errc> parse_errc(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace swag
