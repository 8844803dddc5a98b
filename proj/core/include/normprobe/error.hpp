#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace normprobe {

/// Failure categories surfaced by the toolkit. Every thrown normprobe::Error
/// carries one of these so callers (and the run report) can classify it.
enum class ErrorCode {
  io,
  parse,
  dimension_mismatch,
  non_finite,
  duplicate,
  hash_mismatch,
  overwrite_refused,
  out_of_range,
  alignment,
  length_mismatch,
  count_mismatch,
  inconsistent_dimension,
  http_status,
  retries_exhausted,
  zero_variance,
  ambiguous_direction,
  missing_polarity,
  too_few_samples,
  degenerate_input,
  unstable_bootstrap,
  invalid_argument,
  config,
  nothing_to_report,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Sink for non-fatal diagnostics (unknown language codes and the like).
/// The default handler writes "warning: <msg>" to stderr.
using WarningHandler = void (*)(std::string_view message);
WarningHandler set_warning_handler(WarningHandler handler) noexcept;
void warn(std::string_view message);

}  // namespace normprobe
