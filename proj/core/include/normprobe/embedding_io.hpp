#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace normprobe {

enum class Pooling { mean_pooled, sentence_tuned };
enum class Polarity { positive, negative };

std::string_view to_string(Pooling pooling) noexcept;
Pooling parse_pooling(std::string_view text);
std::string_view to_string(Polarity polarity) noexcept;
Polarity parse_polarity(std::string_view text);

/// A statement as it appears in statements / anchor-label CSV files.
/// `polarity` is set exactly for anchors.
struct Statement {
  std::string id;
  std::string lang;
  std::string text;
  std::optional<Polarity> polarity;

  bool is_anchor() const noexcept { return polarity.has_value(); }
};

struct Manifest {
  std::string model_name;
  Pooling pooling = Pooling::sentence_tuned;
  std::size_t dim = 0;
  std::string template_set_id;
  std::string content_hash;

  bool operator==(const Manifest&) const = default;
};

struct EmbeddingRecord {
  std::string statement_id;
  std::string lang;
  std::vector<double> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// Validated, canonically ordered collection of embeddings for one model.
/// Records are sorted by (lang, statement_id); the manifest's content_hash
/// always matches the stored records.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  /// Validates (dim, finiteness, uniqueness, language codes), sorts, and
  /// stamps manifest.content_hash. Any incoming content_hash is replaced.
  static EmbeddingSet create(Manifest manifest, std::vector<EmbeddingRecord> records);

  const Manifest& manifest() const noexcept { return manifest_; }
  std::span<const EmbeddingRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  /// Languages present, in canonical order.
  std::vector<std::string> languages() const;
  /// Subset holding only `lang` records (manifest re-hashed).
  EmbeddingSet only_language(std::string_view lang) const;
  const EmbeddingRecord* find(std::string_view statement_id, std::string_view lang) const;

  bool operator==(const EmbeddingSet&) const = default;

 private:
  Manifest manifest_;
  std::vector<EmbeddingRecord> records_;
};

/// SHA-256 over records in the given order. Each record contributes its
/// UTF-8 id, a 0x00 byte, its lang, a 0x00 byte, the component count as
/// u64 LE, then each component as IEEE-754 binary64 LE.
std::string content_hash(std::span<const EmbeddingRecord> records);

EmbeddingSet read_embedding_set(const std::filesystem::path& path);
void write_embedding_set(const EmbeddingSet& set, const std::filesystem::path& path,
                         bool overwrite);

struct RatingEntry {
  std::string statement_id;
  double rating = 0.0;
};

struct RatingTable {
  std::vector<RatingEntry> entries;

  std::vector<std::string> ids() const;
};

/// CSV with header `id,text,rating`; ratings must lie in [-1, 1].
RatingTable read_ratings(const std::filesystem::path& path);

/// CSV with header `id,text,polarity` (polarity blank for non-anchors).
/// `lang` is stamped onto every statement.
std::vector<Statement> read_statements(const std::filesystem::path& path, std::string_view lang);

enum class AlignMode { strict, intersect };

struct IndexPair {
  std::size_t left = 0;
  std::size_t right = 0;

  bool operator==(const IndexPair&) const = default;
};

/// Pairs positions holding the same id, ordered by id. Strict mode requires
/// identical id sets and reports the ids missing on each side.
std::vector<IndexPair> align_by_id(std::span<const std::string> left_ids,
                                   std::span<const std::string> right_ids, AlignMode mode);

}  // namespace normprobe
