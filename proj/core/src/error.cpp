#include "normprobe/error.hpp"

#include <atomic>
#include <iostream>

namespace normprobe {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::duplicate: return "duplicate";
    case ErrorCode::hash_mismatch: return "hash_mismatch";
    case ErrorCode::overwrite_refused: return "overwrite_refused";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::alignment: return "alignment";
    case ErrorCode::length_mismatch: return "length_mismatch";
    case ErrorCode::count_mismatch: return "count_mismatch";
    case ErrorCode::inconsistent_dimension: return "inconsistent_dimension";
    case ErrorCode::http_status: return "http_status";
    case ErrorCode::retries_exhausted: return "retries_exhausted";
    case ErrorCode::zero_variance: return "zero_variance";
    case ErrorCode::ambiguous_direction: return "ambiguous_direction";
    case ErrorCode::missing_polarity: return "missing_polarity";
    case ErrorCode::too_few_samples: return "too_few_samples";
    case ErrorCode::degenerate_input: return "degenerate_input";
    case ErrorCode::unstable_bootstrap: return "unstable_bootstrap";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::config: return "config";
    case ErrorCode::nothing_to_report: return "nothing_to_report";
  }
  return "unknown";
}

namespace {

void stderr_handler(std::string_view message) {
  std::cerr << "warning: " << message << '\n';
}

std::atomic<WarningHandler> g_handler{&stderr_handler};

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) noexcept {
  return g_handler.exchange(handler ? handler : &stderr_handler);
}

void warn(std::string_view message) { g_handler.load()(message); }

}  // namespace normprobe
