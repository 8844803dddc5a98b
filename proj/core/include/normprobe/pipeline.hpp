#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "normprobe/correlation_stats.hpp"
#include "normprobe/error.hpp"
#include "normprobe/moral_direction.hpp"
#include "normprobe/run_config.hpp"

namespace normprobe {

std::string_view toolkit_version() noexcept;

struct CellFailure {
  ErrorCode code = ErrorCode::io;
  std::string stage;    // "parse", "fit", "score", "agreement"
  std::string message;
};

/// One requested (model, lang) cell: a result or a typed failure.
struct CellOutcome {
  std::string model;
  std::string lang;
  std::optional<CorrelationResult> result;
  std::optional<CellFailure> failure;
};

struct DirectionSummary {
  std::string lang;  // empty for the shared direction
  double explained_variance_ratio = 0.0;
  double scale = 0.0;
  std::string anchor_hash;
  std::size_t n_anchors = 0;
};

struct ModelOutcome {
  std::string name;
  std::string slug;  // artifact subdirectory
  std::vector<std::string> langs;
  std::vector<DirectionSummary> directions;
  std::optional<CorrelationMatrix> matrix;
  std::optional<CellFailure> matrix_failure;
};

struct RunReport {
  std::vector<CellOutcome> cells;  // models x their langs, config order
  std::vector<ModelOutcome> models;
  std::vector<std::string> langs;
  Method method = Method::pearson;
  std::optional<BootstrapConfig> bootstrap;
  std::string config_hash;
  std::string version;
  std::string started_at;
  std::string finished_at;

  bool all_succeeded() const noexcept;
  /// 0 when every cell and matrix succeeded, 2 otherwise.
  int exit_code() const noexcept;
};

/// Fits, scores, correlates and writes artifacts into config.output_dir:
///   report.md, results.json, provenance.json and per model
///   <slug>/direction.json (or direction.<lang>.json), <slug>/scores.csv,
///   <slug>/matrix.json.
/// Failures are recorded per cell; throws nothing_to_report when every
/// cell failed.
RunReport run(const RunConfig& config);

/// Markdown report. Contains no timestamps.
std::string render_report(const RunReport& report);
std::string results_to_json(const RunReport& report);
RunReport results_from_json(std::string_view text);
/// One row per cell: model,lang,method,n,r,ci_low,ci_high,status
std::string render_results_csv(const RunReport& report);

/// Filesystem-safe name for a model: [A-Za-z0-9._-], others folded to '_'.
std::string model_slug(std::string_view name);

}  // namespace normprobe
