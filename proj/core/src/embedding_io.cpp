#include "normprobe/embedding_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>
#include <tuple>

#include <json.hpp>

#include "normprobe/csv.hpp"
#include "normprobe/error.hpp"
#include "normprobe/hashing.hpp"
#include "normprobe/language.hpp"

namespace normprobe {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Pooling pooling) noexcept {
  return pooling == Pooling::mean_pooled ? "mean_pooled" : "sentence_tuned";
}

Pooling parse_pooling(std::string_view text) {
  if (text == "mean_pooled" || text == "mean") return Pooling::mean_pooled;
  if (text == "sentence_tuned" || text == "sentence") return Pooling::sentence_tuned;
  throw Error(ErrorCode::parse, "unknown pooling \"" + std::string(text) +
                                    "\" (expected mean_pooled or sentence_tuned)");
}

std::string_view to_string(Polarity polarity) noexcept {
  return polarity == Polarity::positive ? "positive" : "negative";
}

Polarity parse_polarity(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "positive" || lower == "+") return Polarity::positive;
  if (lower == "negative" || lower == "-") return Polarity::negative;
  throw Error(ErrorCode::parse, "unknown polarity \"" + std::string(text) + "\"");
}

namespace {

bool record_less(const EmbeddingRecord& a, const EmbeddingRecord& b) {
  return std::tie(a.lang, a.statement_id) < std::tie(b.lang, b.statement_id);
}

std::string where(std::size_t line) {
  return line == 0 ? std::string() : " at line " + std::to_string(line);
}

void validate_record(const EmbeddingRecord& r, std::size_t dim, std::size_t line) {
  if (r.statement_id.empty()) throw Error(ErrorCode::parse, "empty statement id" + where(line));
  check_language_code(r.lang);
  if (r.vector.size() != dim) {
    throw Error(ErrorCode::dimension_mismatch,
                "dimension mismatch" + where(line) + ": expected " + std::to_string(dim) +
                    " components, got " + std::to_string(r.vector.size()));
  }
  for (double v : r.vector) {
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "non-finite component" + where(line));
  }
}

// Python's json module emits bare NaN / Infinity. Map them to null so the
// line parses and the offending component can be reported as non-finite.
std::string neutralize_nonfinite_tokens(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < line.size()) {
        out.push_back(line[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    auto rest = line.substr(i);
    if (rest.starts_with("NaN")) {
      out += "null";
      i += 2;
    } else if (rest.starts_with("-Infinity")) {
      out += "null";
      i += 8;
    } else if (rest.starts_with("Infinity")) {
      out += "null";
      i += 7;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

ordered_json parse_line(std::string_view line, std::size_t line_no) {
  auto parsed = ordered_json::parse(line, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  auto patched = ordered_json::parse(neutralize_nonfinite_tokens(line), nullptr, false);
  if (!patched.is_discarded()) return patched;
  throw Error(ErrorCode::parse, "malformed JSON at line " + std::to_string(line_no));
}

const ordered_json& require(const ordered_json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::parse,
                "missing field \"" + std::string(key) + "\" at line " + std::to_string(line_no));
  }
  return *it;
}

std::string require_string(const ordered_json& obj, const char* key, std::size_t line_no) {
  const auto& v = require(obj, key, line_no);
  if (!v.is_string()) {
    throw Error(ErrorCode::parse,
                "field \"" + std::string(key) + "\" must be a string at line " + std::to_string(line_no));
  }
  return v.get<std::string>();
}

void reject_unknown_keys(const ordered_json& obj, std::initializer_list<std::string_view> allowed,
                         std::size_t line_no) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::parse,
                  "unknown field \"" + key + "\" at line " + std::to_string(line_no));
    }
  }
}

Manifest parse_manifest(const ordered_json& line, std::size_t line_no) {
  if (!line.is_object() || !line.contains("manifest") || line.size() != 1 ||
      !line["manifest"].is_object()) {
    throw Error(ErrorCode::parse, "line 1 must be a {\"manifest\":{...}} object");
  }
  const auto& m = line["manifest"];
  reject_unknown_keys(m, {"model_name", "pooling", "dim", "template_set_id", "content_hash"}, line_no);
  Manifest out;
  out.model_name = require_string(m, "model_name", line_no);
  try {
    out.pooling = parse_pooling(require_string(m, "pooling", line_no));
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, std::string(e.what()) + " at line 1");
  }
  const auto& dim = require(m, "dim", line_no);
  if (!dim.is_number_integer() || dim.get<long long>() < 1) {
    throw Error(ErrorCode::parse, "manifest dim must be a positive integer at line 1");
  }
  out.dim = dim.get<std::size_t>();
  out.template_set_id = require_string(m, "template_set_id", line_no);
  out.content_hash = require_string(m, "content_hash", line_no);
  return out;
}

EmbeddingRecord parse_record(const ordered_json& obj, std::size_t line_no) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::parse, "expected a record object at line " + std::to_string(line_no));
  }
  reject_unknown_keys(obj, {"id", "lang", "vector"}, line_no);
  EmbeddingRecord r;
  r.statement_id = require_string(obj, "id", line_no);
  r.lang = require_string(obj, "lang", line_no);
  const auto& vec = require(obj, "vector", line_no);
  if (!vec.is_array()) {
    throw Error(ErrorCode::parse, "field \"vector\" must be an array at line " + std::to_string(line_no));
  }
  r.vector.reserve(vec.size());
  for (const auto& v : vec) {
    if (v.is_null()) {
      throw Error(ErrorCode::non_finite, "non-finite component at line " + std::to_string(line_no));
    }
    if (!v.is_number()) {
      throw Error(ErrorCode::parse, "non-numeric vector component at line " + std::to_string(line_no));
    }
    r.vector.push_back(v.get<double>());
  }
  return r;
}

}  // namespace

std::string content_hash(std::span<const EmbeddingRecord> records) {
  Sha256 h;
  for (const auto& r : records) {
    h.update(r.statement_id);
    h.update(std::string_view("\0", 1));
    h.update(r.lang);
    h.update(std::string_view("\0", 1));
    h.update_u64(r.vector.size());
    for (double v : r.vector) h.update_f64(v);
  }
  return h.hex_digest();
}

EmbeddingSet EmbeddingSet::create(Manifest manifest, std::vector<EmbeddingRecord> records) {
  if (manifest.dim < 1) throw Error(ErrorCode::parse, "manifest dim must be >= 1");
  for (const auto& r : records) validate_record(r, manifest.dim, 0);
  std::sort(records.begin(), records.end(), record_less);
  auto dup = std::adjacent_find(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.lang == b.lang && a.statement_id == b.statement_id;
  });
  if (dup != records.end()) {
    throw Error(ErrorCode::duplicate,
                "duplicate record (" + dup->statement_id + ", " + dup->lang + ")");
  }
  EmbeddingSet set;
  manifest.content_hash = content_hash(records);
  set.manifest_ = std::move(manifest);
  set.records_ = std::move(records);
  return set;
}

std::vector<std::string> EmbeddingSet::languages() const {
  std::vector<std::string> out;
  for (const auto& r : records_) {
    if (out.empty() || out.back() != r.lang) out.push_back(r.lang);
  }
  return out;
}

EmbeddingSet EmbeddingSet::only_language(std::string_view lang) const {
  std::vector<EmbeddingRecord> subset;
  for (const auto& r : records_) {
    if (r.lang == lang) subset.push_back(r);
  }
  return create(manifest_, std::move(subset));
}

const EmbeddingRecord* EmbeddingSet::find(std::string_view statement_id, std::string_view lang) const {
  auto it = std::lower_bound(records_.begin(), records_.end(), std::pair{lang, statement_id},
                             [](const EmbeddingRecord& r, const auto& key) {
                               return std::tie(r.lang, r.statement_id) <
                                      std::tie(key.first, key.second);
                             });
  if (it == records_.end() || it->lang != lang || it->statement_id != statement_id) return nullptr;
  return &*it;
}

EmbeddingSet read_embedding_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  std::optional<Manifest> manifest;
  std::vector<EmbeddingRecord> records;
  std::set<std::pair<std::string, std::string>> seen;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto obj = parse_line(line, line_no);
    if (!manifest) {
      if (line_no != 1) throw Error(ErrorCode::parse, "manifest must be on line 1");
      manifest = parse_manifest(obj, line_no);
      continue;
    }
    auto record = parse_record(obj, line_no);
    validate_record(record, manifest->dim, line_no);
    if (!seen.emplace(record.lang, record.statement_id).second) {
      throw Error(ErrorCode::duplicate, "duplicate record (" + record.statement_id + ", " +
                                            record.lang + ") at line " + std::to_string(line_no));
    }
    records.push_back(std::move(record));
  }
  if (!manifest) throw Error(ErrorCode::parse, "empty embedding file " + path.string());

  std::sort(records.begin(), records.end(), record_less);
  auto actual = content_hash(records);
  if (actual != manifest->content_hash) {
    throw Error(ErrorCode::hash_mismatch, "content hash mismatch in " + path.string() +
                                              ": manifest says " + manifest->content_hash +
                                              ", records hash to " + actual);
  }
  return EmbeddingSet::create(std::move(*manifest), std::move(records));
}

void write_embedding_set(const EmbeddingSet& set, const std::filesystem::path& path, bool overwrite) {
  std::error_code ec;
  if (!overwrite && std::filesystem::exists(path, ec)) {
    throw Error(ErrorCode::overwrite_refused, "refusing to overwrite " + path.string());
  }
  const auto& m = set.manifest();
  ordered_json header;
  header["manifest"] = {{"model_name", m.model_name},
                        {"pooling", to_string(m.pooling)},
                        {"dim", m.dim},
                        {"template_set_id", m.template_set_id},
                        {"content_hash", content_hash(set.records())}};

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
    out << header.dump() << '\n';
    for (const auto& r : set.records()) {
      ordered_json rec;
      rec["id"] = r.statement_id;
      rec["lang"] = r.lang;
      rec["vector"] = r.vector;
      out << rec.dump() << '\n';
    }
    out.flush();
    if (!out) throw Error(ErrorCode::io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::io, "cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::vector<std::string> RatingTable::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.statement_id);
  return out;
}

namespace {

std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

void require_header(const csv::Document& doc, std::initializer_list<std::string_view> columns,
                    const std::filesystem::path& path) {
  for (auto c : columns) {
    if (doc.column(c) == std::string::npos) {
      std::string expected;
      for (auto col : columns) expected += (expected.empty() ? "" : ",") + std::string(col);
      throw Error(ErrorCode::parse, path.string() + ": header must contain " + expected);
    }
  }
}

}  // namespace

RatingTable read_ratings(const std::filesystem::path& path) {
  auto doc = csv::read_file(path);
  require_header(doc, {"id", "text", "rating"}, path);
  auto id_col = doc.column("id");
  auto rating_col = doc.column("rating");

  RatingTable table;
  std::set<std::string, std::less<>> seen;
  for (const auto& row : doc.rows) {
    auto at = " at line " + std::to_string(row.line);
    if (row.fields.size() != doc.header.size()) {
      throw Error(ErrorCode::parse, "unparseable row" + at + ": expected " +
                                        std::to_string(doc.header.size()) + " fields");
    }
    const auto& id = row.fields[id_col];
    if (id.empty()) throw Error(ErrorCode::parse, "unparseable row" + at + ": empty id");
    auto rating = parse_double(row.fields[rating_col]);
    if (!rating) throw Error(ErrorCode::parse, "unparseable row" + at + ": bad rating");
    if (!(*rating >= -1.0 && *rating <= 1.0)) {
      throw Error(ErrorCode::out_of_range, "rating out of range" + at + ": " + row.fields[rating_col]);
    }
    if (!seen.insert(id).second) throw Error(ErrorCode::duplicate, "duplicate statement id " + id + at);
    table.entries.push_back({id, *rating});
  }
  return table;
}

std::vector<Statement> read_statements(const std::filesystem::path& path, std::string_view lang) {
  auto doc = csv::read_file(path);
  require_header(doc, {"id", "text", "polarity"}, path);
  auto id_col = doc.column("id");
  auto text_col = doc.column("text");
  auto pol_col = doc.column("polarity");

  std::vector<Statement> out;
  std::set<std::string, std::less<>> seen;
  for (const auto& row : doc.rows) {
    auto at = " at line " + std::to_string(row.line);
    if (row.fields.size() != doc.header.size()) {
      throw Error(ErrorCode::parse, "unparseable row" + at);
    }
    Statement s;
    s.id = row.fields[id_col];
    s.lang = std::string(lang);
    s.text = row.fields[text_col];
    if (s.id.empty()) throw Error(ErrorCode::parse, "empty id" + at);
    if (!row.fields[pol_col].empty()) {
      try {
        s.polarity = parse_polarity(row.fields[pol_col]);
      } catch (const Error& e) {
        throw Error(ErrorCode::parse, std::string(e.what()) + at);
      }
    }
    if (!seen.insert(s.id).second) throw Error(ErrorCode::duplicate, "duplicate statement id " + s.id + at);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace normprobe
