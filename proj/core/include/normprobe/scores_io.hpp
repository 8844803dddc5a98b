#pragma once

#include <filesystem>
#include <string>

#include "normprobe/moral_direction.hpp"

namespace normprobe {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);

/// Scores CSV: header `id,lang,score`, rows in table order.
std::string scores_to_csv(const ScoreTable& table);
ScoreTable read_scores_csv(const std::filesystem::path& path);

}  // namespace normprobe
