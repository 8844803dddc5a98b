#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "normprobe/correlation_stats.hpp"
#include "normprobe/embedding_io.hpp"
#include "normprobe/remote.hpp"

namespace normprobe {

struct ModelConfig {
  std::string name;
  /// lang -> embedding JSONL. Empty when the model is served remotely.
  std::map<std::string, std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> anchors;  // anchor embedding JSONL
  std::optional<std::string> endpoint;
  Pooling pooling = Pooling::sentence_tuned;  // stamped on fetched sets
  FetchOptions fetch;
  /// Languages evaluated for this model, in run order. Defaults to all.
  std::vector<std::string> langs;
};

struct AnchorConfig {
  std::filesystem::path statements;  // id,text,polarity
  std::optional<std::string> lang;   // restrict the shared fit to one language
  double scale_percentile = 100.0;
};

struct RunConfig {
  std::vector<ModelConfig> models;
  AnchorConfig anchors;
  std::filesystem::path ratings_path;
  std::vector<std::string> langs;
  Method method = Method::pearson;
  std::optional<BootstrapConfig> bootstrap;
  std::filesystem::path output_dir;
  bool strict_alignment = true;
  bool per_lang_direction = false;
  /// lang -> statements CSV, required when any model uses an endpoint.
  std::map<std::string, std::filesystem::path> statements;
  /// SHA-256 of the config file bytes.
  std::string config_hash;
};

/// Reads a TOML run configuration with sections [run], [[models]],
/// [anchors], [ratings] and optional [bootstrap]. Relative paths resolve
/// against the config file's directory. Unknown keys are errors.
RunConfig parse_config(const std::filesystem::path& path);

/// Same, from text; `base_dir` anchors relative paths.
RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir);

}  // namespace normprobe
