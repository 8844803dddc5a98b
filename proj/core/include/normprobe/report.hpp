#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "normprobe/correlation_stats.hpp"

namespace normprobe {

/// Two decimals, leading minus kept, "-0.00" folded to "0.00".
std::string format_two_decimals(double value);

using AgreementKey = std::pair<std::string, std::string>;  // (model, lang)

/// Markdown table: one row per model (in `models` order), one column per
/// language, "---" where a cell is absent.
std::string render_agreement_table(const std::map<AgreementKey, CorrelationResult>& results,
                                   std::span<const std::string> models,
                                   std::span<const std::string> langs);

/// Same, with models taken from `results` in name order.
std::string render_agreement_table(const std::map<AgreementKey, CorrelationResult>& results,
                                   std::span<const std::string> langs);

/// Lower-triangular plain-text table, two-space separated:
/// diagonal "1.0", below it two decimals, above it "---".
std::string render_matrix(const CorrelationMatrix& matrix);

}  // namespace normprobe
