#include "normprobe/scores_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <set>
#include <tuple>

#include "normprobe/csv.hpp"
#include "normprobe/error.hpp"
#include "normprobe/language.hpp"

namespace normprobe {

std::string format_real(double value) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::string scores_to_csv(const ScoreTable& table) {
  std::string out = "id,lang,score\n";
  for (const auto& e : table.entries) {
    out += csv::escape(e.statement_id);
    out += ',';
    out += e.lang;
    out += ',';
    out += format_real(e.score);
    out += '\n';
  }
  return out;
}

ScoreTable read_scores_csv(const std::filesystem::path& path) {
  auto doc = csv::read_file(path);
  auto id_col = doc.column("id");
  auto lang_col = doc.column("lang");
  auto score_col = doc.column("score");
  if (id_col == std::string::npos || lang_col == std::string::npos || score_col == std::string::npos) {
    throw Error(ErrorCode::parse, path.string() + ": header must contain id,lang,score");
  }
  ScoreTable table;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& row : doc.rows) {
    auto at = path.string() + " line " + std::to_string(row.line);
    if (row.fields.size() != doc.header.size()) throw Error(ErrorCode::parse, "unparseable row at " + at);
    ScoreEntry e;
    e.statement_id = row.fields[id_col];
    e.lang = row.fields[lang_col];
    check_language_code(e.lang);
    const auto& text = row.fields[score_col];
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), e.score);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
      throw Error(ErrorCode::parse, "bad score at " + at);
    }
    if (!(e.score >= -1.0 && e.score <= 1.0)) throw Error(ErrorCode::out_of_range, "score out of range at " + at);
    if (!seen.emplace(e.lang, e.statement_id).second) {
      throw Error(ErrorCode::duplicate, "duplicate (id, lang) at " + at);
    }
    table.entries.push_back(std::move(e));
  }
  std::sort(table.entries.begin(), table.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.lang, a.statement_id) < std::tie(b.lang, b.statement_id);
  });
  return table;
}

}  // namespace normprobe
