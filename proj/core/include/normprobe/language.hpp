#pragma once

#include <string_view>

namespace normprobe {

/// Two lowercase ASCII letters.
bool is_wellformed_language_code(std::string_view code) noexcept;

/// Member of the ISO 639-1 code list.
bool is_known_language(std::string_view code) noexcept;

/// Throws Error{parse} for malformed codes; warns once per unknown code.
void check_language_code(std::string_view code);

}  // namespace normprobe
