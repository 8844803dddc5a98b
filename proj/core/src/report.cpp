#include "normprobe/report.hpp"

#include <cstdio>
#include <set>

#include "normprobe/error.hpp"

namespace normprobe {

std::string format_two_decimals(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  std::string out(buf);
  if (out == "-0.00") out = "0.00";
  return out;
}

namespace {

std::string escape_cell(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string render_agreement_table(const std::map<AgreementKey, CorrelationResult>& results,
                                   std::span<const std::string> models,
                                   std::span<const std::string> langs) {
  if (langs.empty()) throw Error(ErrorCode::invalid_argument, "agreement table needs at least one language");
  if (results.empty()) throw Error(ErrorCode::invalid_argument, "empty results");

  std::string out = "| Model |";
  for (const auto& l : langs) out += " " + l + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < langs.size(); ++i) out += "---|";
  out += '\n';
  for (const auto& model : models) {
    out += "| " + escape_cell(model) + " |";
    for (const auto& lang : langs) {
      auto it = results.find({model, lang});
      out += " " + (it == results.end() ? std::string("---") : format_two_decimals(it->second.r)) + " |";
    }
    out += '\n';
  }
  return out;
}

std::string render_agreement_table(const std::map<AgreementKey, CorrelationResult>& results,
                                   std::span<const std::string> langs) {
  std::vector<std::string> models;
  for (const auto& [key, _] : results) {
    if (models.empty() || models.back() != key.first) models.push_back(key.first);
  }
  return render_agreement_table(results, models, langs);
}

std::string render_matrix(const CorrelationMatrix& matrix) {
  const auto L = matrix.langs.size();
  std::string out = "language";
  for (const auto& l : matrix.langs) out += "  " + l;
  out += '\n';
  for (std::size_t i = 0; i < L; ++i) {
    out += matrix.langs[i];
    for (std::size_t j = 0; j < L; ++j) {
      out += "  ";
      if (j == i) {
        out += "1.0";
      } else if (j < i) {
        out += format_two_decimals(matrix.values[i][j]);
      } else {
        out += "---";
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace normprobe
