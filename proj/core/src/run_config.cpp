#include "normprobe/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "normprobe/error.hpp"
#include "normprobe/hashing.hpp"
#include "normprobe/language.hpp"

namespace normprobe {

namespace {

namespace fs = std::filesystem;

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

[[noreturn]] void fail(const std::string& message) { throw Error(ErrorCode::config, message); }

std::string join_path(std::string_view parent, std::string_view key) {
  return parent.empty() ? std::string(key) : std::string(parent) + "." + std::string(key);
}

std::string_view type_name(const toml::node& node) {
  switch (node.type()) {
    case toml::node_type::table: return "table";
    case toml::node_type::array: return "array";
    case toml::node_type::string: return "string";
    case toml::node_type::integer: return "integer";
    case toml::node_type::floating_point: return "float";
    case toml::node_type::boolean: return "boolean";
    default: return "date/time";
  }
}

void check_keys(const toml::table& table, std::string_view path,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : table) {
    auto k = key.str();
    if (std::find(allowed.begin(), allowed.end(), k) != allowed.end()) continue;
    std::string_view best;
    std::size_t best_d = std::string::npos;
    for (auto a : allowed) {
      auto d = edit_distance(k, a);
      if (d < best_d) {
        best_d = d;
        best = a;
      }
    }
    std::string msg = "unknown key \"" + join_path(path, k) + "\"";
    if (!best.empty()) msg += " (did you mean \"" + join_path(path, best) + "\"?)";
    fail(msg);
  }
}

void type_error(std::string_view path, std::string_view expected, const toml::node& got) {
  fail(std::string(path) + ": expected " + std::string(expected) + ", got " + std::string(type_name(got)));
}

const toml::table* table_at(const toml::table& parent, std::string_view key, std::string_view path,
                            bool required) {
  const auto* node = parent.get(key);
  if (!node) {
    if (required) fail("missing required key \"" + join_path(path, key) + "\"");
    return nullptr;
  }
  if (!node->is_table()) type_error(join_path(path, key), "table", *node);
  return node->as_table();
}

std::optional<std::string> string_at(const toml::table& t, std::string_view key, std::string_view path,
                                     bool required) {
  const auto* node = t.get(key);
  if (!node) {
    if (required) fail("missing required key \"" + join_path(path, key) + "\"");
    return std::nullopt;
  }
  if (!node->is_string()) type_error(join_path(path, key), "string", *node);
  return node->as_string()->get();
}

std::optional<bool> bool_at(const toml::table& t, std::string_view key, std::string_view path) {
  const auto* node = t.get(key);
  if (!node) return std::nullopt;
  if (!node->is_boolean()) type_error(join_path(path, key), "boolean", *node);
  return node->as_boolean()->get();
}

std::optional<std::int64_t> int_at(const toml::table& t, std::string_view key, std::string_view path,
                                   std::int64_t min_value) {
  const auto* node = t.get(key);
  if (!node) return std::nullopt;
  if (!node->is_integer()) type_error(join_path(path, key), "integer", *node);
  auto v = node->as_integer()->get();
  if (v < min_value) {
    fail(join_path(path, key) + ": must be >= " + std::to_string(min_value));
  }
  return v;
}

std::optional<double> real_at(const toml::table& t, std::string_view key, std::string_view path) {
  const auto* node = t.get(key);
  if (!node) return std::nullopt;
  if (node->is_integer()) return static_cast<double>(node->as_integer()->get());
  if (!node->is_floating_point()) type_error(join_path(path, key), "number", *node);
  return node->as_floating_point()->get();
}

std::vector<std::string> string_array_at(const toml::table& t, std::string_view key,
                                         std::string_view path, bool required) {
  const auto* node = t.get(key);
  if (!node) {
    if (required) fail("missing required key \"" + join_path(path, key) + "\"");
    return {};
  }
  if (!node->is_array()) type_error(join_path(path, key), "array of strings", *node);
  std::vector<std::string> out;
  std::size_t i = 0;
  for (const auto& item : *node->as_array()) {
    auto item_path = join_path(path, key) + "[" + std::to_string(i++) + "]";
    if (!item.is_string()) type_error(item_path, "string", item);
    out.push_back(item.as_string()->get());
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void require_exists(const fs::path& p, std::string_view key_path) {
  std::error_code ec;
  if (!fs::exists(p, ec)) fail(std::string(key_path) + ": file not found: " + p.string());
}

std::vector<std::string> languages_at(const toml::table& t, std::string_view key, std::string_view path,
                                      bool required) {
  auto langs = string_array_at(t, key, path, required);
  for (std::size_t i = 0; i < langs.size(); ++i) {
    try {
      check_language_code(langs[i]);
    } catch (const Error& e) {
      fail(join_path(path, key) + ": " + e.what());
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (langs[i] == langs[j]) fail(join_path(path, key) + ": duplicate language \"" + langs[i] + "\"");
    }
  }
  return langs;
}

std::map<std::string, fs::path> lang_paths_at(const toml::table& t, std::string_view key,
                                              std::string_view path, const fs::path& base) {
  std::map<std::string, fs::path> out;
  const auto* table = table_at(t, key, path, false);
  if (!table) return out;
  auto table_path = join_path(path, key);
  for (const auto& [k, node] : *table) {
    auto lang = std::string(k.str());
    auto item_path = join_path(table_path, lang);
    if (!node.is_string()) type_error(item_path, "string", node);
    try {
      check_language_code(lang);
    } catch (const Error& e) {
      fail(item_path + ": " + e.what());
    }
    auto p = resolve(base, node.as_string()->get());
    require_exists(p, item_path);
    out.emplace(lang, p);
  }
  return out;
}

ModelConfig parse_model(const toml::table& t, std::string_view path, const RunConfig& run,
                        const fs::path& base) {
  check_keys(t, path, {"name", "embeddings", "anchors", "endpoint", "pooling", "langs", "batch_size",
                       "timeout_ms", "retries", "max_in_flight"});
  ModelConfig m;
  m.name = *string_at(t, "name", path, true);
  if (m.name.empty()) fail(join_path(path, "name") + ": must be non-empty");
  m.embeddings = lang_paths_at(t, "embeddings", path, base);
  m.endpoint = string_at(t, "endpoint", path, false);
  if (auto anchors = string_at(t, "anchors", path, false)) {
    m.anchors = resolve(base, *anchors);
    require_exists(*m.anchors, join_path(path, "anchors"));
  }
  if (auto pooling = string_at(t, "pooling", path, false)) {
    try {
      m.pooling = parse_pooling(*pooling);
    } catch (const Error& e) {
      fail(join_path(path, "pooling") + ": " + e.what());
    }
  }
  if (auto v = int_at(t, "batch_size", path, 1)) m.fetch.batch_size = static_cast<std::size_t>(*v);
  if (auto v = int_at(t, "timeout_ms", path, 1)) m.fetch.timeout = std::chrono::milliseconds(*v);
  if (auto v = int_at(t, "retries", path, 0)) m.fetch.retries = static_cast<unsigned>(*v);
  if (auto v = int_at(t, "max_in_flight", path, 1)) m.fetch.max_in_flight = static_cast<std::size_t>(*v);

  auto own = languages_at(t, "langs", path, false);
  if (own.empty()) {
    m.langs = run.langs;
  } else {
    for (const auto& l : own) {
      if (std::find(run.langs.begin(), run.langs.end(), l) == run.langs.end()) {
        fail(join_path(path, "langs") + ": \"" + l + "\" is not listed in run.langs");
      }
    }
    for (const auto& l : run.langs) {
      if (std::find(own.begin(), own.end(), l) != own.end()) m.langs.push_back(l);
    }
  }

  if (m.endpoint) {
    if (!m.embeddings.empty()) fail(std::string(path) + ": set either embeddings or endpoint, not both");
    for (const auto& l : m.langs) {
      if (!run.statements.contains(l)) {
        fail(std::string(path) + ": endpoint model needs run.statements." + l);
      }
    }
  } else {
    if (m.embeddings.empty()) fail(std::string(path) + ": missing required key \"embeddings\" (or \"endpoint\")");
    if (!m.anchors) fail("missing required key \"" + join_path(path, "anchors") + "\"");
    for (const auto& l : m.langs) {
      if (!m.embeddings.contains(l)) fail(join_path(path, "embeddings") + ": no file for language \"" + l + "\"");
    }
  }
  return m;
}

}  // namespace

RunConfig parse_config_text(std::string_view text, const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML syntax error at line " << e.source().begin.line << ": " << e.description();
    fail(msg.str());
  }

  check_keys(root, "", {"run", "models", "anchors", "ratings", "bootstrap"});
  RunConfig cfg;
  cfg.config_hash = sha256_hex(text);

  const auto* run = table_at(root, "run", "", true);
  check_keys(*run, "run", {"langs", "method", "output_dir", "strict_alignment", "per_lang_direction",
                           "statements"});
  cfg.langs = languages_at(*run, "langs", "run", true);
  if (cfg.langs.empty()) fail("run.langs: must list at least one language");
  if (auto method = string_at(*run, "method", "run", false)) {
    try {
      cfg.method = parse_method(*method);
    } catch (const Error& e) {
      fail(std::string("run.method: ") + e.what());
    }
  }
  cfg.output_dir = resolve(base_dir, string_at(*run, "output_dir", "run", false).value_or("normprobe-out"));
  cfg.strict_alignment = bool_at(*run, "strict_alignment", "run").value_or(true);
  cfg.per_lang_direction = bool_at(*run, "per_lang_direction", "run").value_or(false);
  cfg.statements = lang_paths_at(*run, "statements", "run", base_dir);

  const auto* anchors = table_at(root, "anchors", "", true);
  check_keys(*anchors, "anchors", {"statements", "lang", "scale_percentile"});
  cfg.anchors.statements = resolve(base_dir, *string_at(*anchors, "statements", "anchors", true));
  require_exists(cfg.anchors.statements, "anchors.statements");
  cfg.anchors.lang = string_at(*anchors, "lang", "anchors", false);
  if (cfg.anchors.lang) {
    try {
      check_language_code(*cfg.anchors.lang);
    } catch (const Error& e) {
      fail(std::string("anchors.lang: ") + e.what());
    }
  }
  cfg.anchors.scale_percentile = real_at(*anchors, "scale_percentile", "anchors").value_or(100.0);
  if (!(cfg.anchors.scale_percentile > 0.0 && cfg.anchors.scale_percentile <= 100.0)) {
    fail("anchors.scale_percentile: must lie in (0, 100]");
  }

  const auto* ratings = table_at(root, "ratings", "", true);
  check_keys(*ratings, "ratings", {"path"});
  cfg.ratings_path = resolve(base_dir, *string_at(*ratings, "path", "ratings", true));
  require_exists(cfg.ratings_path, "ratings.path");

  if (const auto* boot = table_at(root, "bootstrap", "", false)) {
    check_keys(*boot, "bootstrap", {"n_resamples", "seed", "alpha", "threads"});
    BootstrapConfig b;
    if (auto v = int_at(*boot, "n_resamples", "bootstrap", 100)) b.n_resamples = static_cast<std::size_t>(*v);
    if (auto v = int_at(*boot, "seed", "bootstrap", 0)) b.seed = static_cast<std::uint64_t>(*v);
    if (auto v = real_at(*boot, "alpha", "bootstrap")) {
      if (!(*v > 0.0 && *v < 1.0)) fail("bootstrap.alpha: must lie in (0, 1)");
      b.alpha = *v;
    }
    if (auto v = int_at(*boot, "threads", "bootstrap", 1)) b.threads = static_cast<unsigned>(*v);
    cfg.bootstrap = b;
  }

  const auto* models = root.get("models");
  if (!models) fail("missing required key \"models\"");
  if (!models->is_array_of_tables()) type_error("models", "array of tables", *models);
  std::size_t i = 0;
  for (const auto& node : *models->as_array()) {
    auto path = "models[" + std::to_string(i++) + "]";
    auto model = parse_model(*node.as_table(), path, cfg, base_dir);
    for (const auto& existing : cfg.models) {
      if (existing.name == model.name) fail(path + ".name: duplicate model name \"" + model.name + "\"");
    }
    cfg.models.push_back(std::move(model));
  }
  if (cfg.models.empty()) fail("models: at least one [[models]] entry is required");
  return cfg;
}

RunConfig parse_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::config, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config_text(buf.str(), base);
}

}  // namespace normprobe
