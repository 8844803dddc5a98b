#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "normprobe/embedding_io.hpp"

namespace normprobe {

struct PrincipalComponent {
  std::vector<double> direction;  // unit length, sign unspecified
  double explained_variance_ratio = 0.0;
};

/// Top principal component of the row-centered matrix `rows` (n x d) and
/// sigma_1^2 / sum sigma_i^2 from its singular values.
///
/// Fails with zero_variance when all rows are identical, non_finite on
/// NaN/Inf, and ambiguous_direction when lambda_1 - lambda_2 < 1e-12 lambda_1.
PrincipalComponent top_component(std::span<const std::vector<double>> rows);

struct Anchor {
  std::vector<double> vector;
  Polarity polarity = Polarity::positive;
};

/// How the normalization scale is derived from |anchor projections|.
/// percentile = 100 is the maximum (anchor extremes map to +/-1).
struct FitOptions {
  double scale_percentile = 100.0;
};

struct MoralDirection {
  std::vector<double> direction;
  std::vector<double> mean;
  double scale = 1.0;
  double explained_variance_ratio = 0.0;
  std::string anchor_hash;

  std::size_t dim() const noexcept { return direction.size(); }

  /// `{"direction":[...],"mean":[...],"scale":x,"evr":x,"anchor_hash":hex}`
  std::string to_json() const;
  static MoralDirection from_json(std::string_view text);

  bool operator==(const MoralDirection&) const = default;
};

/// Permutation-invariant SHA-256 of the anchor set.
std::string anchor_hash(std::span<const Anchor> anchors);

/// Centers on the anchor centroid, takes the top principal component, and
/// orients it so positive anchors project positively on average. The scale
/// is the chosen percentile (default: max) of |<a - mean, direction>|.
/// Anchors are canonicalized first, so any permutation yields the same fit.
MoralDirection fit_direction(std::span<const Anchor> anchors, const FitOptions& options = {});

double raw_score(const MoralDirection& md, std::span<const double> embedding);
/// clamp(raw_score / scale, -1, 1)
double moral_score(const MoralDirection& md, std::span<const double> embedding);

struct ScoreEntry {
  std::string statement_id;
  std::string lang;
  double score = 0.0;

  bool operator==(const ScoreEntry&) const = default;
};

struct ScoreTable {
  std::string model_name;
  std::vector<ScoreEntry> entries;  // canonical (lang, statement_id) order

  /// Entries of one language, order preserved.
  ScoreTable only_language(std::string_view lang) const;
  std::vector<std::string> languages() const;

  bool operator==(const ScoreTable&) const = default;
};

ScoreTable score_set(const MoralDirection& md, const EmbeddingSet& set);

}  // namespace normprobe
