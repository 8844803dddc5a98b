#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace normprobe::csv {

/// One parsed data row with its 1-based physical line number.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct Document {
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Index of `name` in the header, or npos.
  std::size_t column(std::string_view name) const noexcept;
};

/// RFC 4180 reader: quoted fields, doubled quotes, embedded commas and
/// newlines. Blank lines are skipped. Throws Error{parse} on unbalanced quotes.
Document parse(std::string_view text);
Document read_file(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

}  // namespace normprobe::csv
