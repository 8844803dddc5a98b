#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "normprobe/embedding_io.hpp"
#include "normprobe/moral_direction.hpp"

namespace normprobe {

enum class Method { pearson, spearman };

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view text);

/// Ranks 1..n, ties receive the mean of the positions they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Sample Pearson r, clamped to [-1, 1]. Requires equal lengths, n >= 3,
/// finite values and non-constant inputs.
double pearson(std::span<const double> x, std::span<const double> y);
/// pearson(average_ranks(x), average_ranks(y))
double spearman(std::span<const double> x, std::span<const double> y);
double correlate(Method method, std::span<const double> x, std::span<const double> y);

/// Name of the resampling generator; recorded in every report.
inline constexpr std::string_view kBootstrapGenerator = "splitmix64";

struct BootstrapConfig {
  std::size_t n_resamples = 1000;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  unsigned threads = 1;
};

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  double alpha = 0.05;
  std::size_t n_resamples = 0;
  std::uint64_t seed = 0;
  std::size_t skipped = 0;  // degenerate resamples

  bool operator==(const ConfidenceInterval&) const = default;
};

/// Percentile bootstrap over paired resamples with replacement.
///
/// Resample k draws its indices from a generator keyed on
/// (seed, stream, k), so the interval does not depend on `threads`.
/// Degenerate resamples are skipped; more than half skipped is an error.
ConfidenceInterval bootstrap_ci(std::span<const double> x, std::span<const double> y,
                                Method method, const BootstrapConfig& config,
                                std::uint64_t stream = 0);

struct CorrelationResult {
  double r = 0.0;
  std::size_t n = 0;
  Method method = Method::pearson;
  std::optional<ConfidenceInterval> ci;
};

/// Correlation of (model score, human rating) pairs for one language,
/// aligned by statement id.
CorrelationResult agreement(const ScoreTable& scores, const RatingTable& ratings, Method method,
                            const std::optional<BootstrapConfig>& bootstrap = std::nullopt,
                            AlignMode mode = AlignMode::strict, std::uint64_t stream = 0);

struct LanguageScores {
  std::string lang;
  std::vector<std::string> ids;
  std::vector<double> scores;
};

struct CorrelationMatrix {
  std::vector<std::string> langs;
  Method method = Method::pearson;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::size_t>> n_per_pair;
  /// Set when computed pairwise on differing id subsets; PSD not guaranteed.
  bool pairwise_incomplete = false;

  /// `{"langs":[...],"method":str,"values":[[...]],"n_per_pair":[[...]]}`
  std::string to_json() const;
  static CorrelationMatrix from_json(std::string_view text);
};

/// Pairwise correlation of per-language scores over shared statement ids.
/// Language order follows the input; the diagonal is exactly 1.
CorrelationMatrix cross_language_matrix(std::span<const LanguageScores> tables, Method method,
                                        AlignMode mode = AlignMode::strict);

}  // namespace normprobe
