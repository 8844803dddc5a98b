#include "normprobe/language.hpp"

#include <algorithm>
#include <array>
#include <mutex>
#include <set>
#include <string>

#include "normprobe/error.hpp"

namespace normprobe {

namespace {

// ISO 639-1, sorted.
constexpr std::array<std::string_view, 183> kIso6391 = {
    "aa", "ab", "ae", "af", "ak", "am", "an", "ar", "as", "av", "ay", "az", "ba", "be", "bg",
    "bi", "bm", "bn", "bo", "br", "bs", "ca", "ce", "ch", "co", "cr", "cs", "cu", "cv", "cy",
    "da", "de", "dv", "dz", "ee", "el", "en", "eo", "es", "et", "eu", "fa", "ff", "fi", "fj",
    "fo", "fr", "fy", "ga", "gd", "gl", "gn", "gu", "gv", "ha", "he", "hi", "ho", "hr", "ht",
    "hu", "hy", "hz", "ia", "id", "ie", "ig", "ii", "ik", "io", "is", "it", "iu", "ja", "jv",
    "ka", "kg", "ki", "kj", "kk", "kl", "km", "kn", "ko", "kr", "ks", "ku", "kv", "kw", "ky",
    "la", "lb", "lg", "li", "ln", "lo", "lt", "lu", "lv", "mg", "mh", "mi", "mk", "ml", "mn",
    "mr", "ms", "mt", "my", "na", "nb", "nd", "ne", "ng", "nl", "nn", "no", "nr", "nv", "ny",
    "oc", "oj", "om", "or", "os", "pa", "pi", "pl", "ps", "pt", "qu", "rm", "rn", "ro", "ru",
    "rw", "sa", "sc", "sd", "se", "sg", "si", "sk", "sl", "sm", "sn", "so", "sq", "sr", "ss",
    "st", "su", "sv", "sw", "ta", "te", "tg", "th", "ti", "tk", "tl", "tn", "to", "tr", "ts",
    "tt", "tw", "ty", "ug", "uk", "ur", "uz", "ve", "vi", "vo", "wa", "wo", "xh", "yi", "yo",
    "za", "zh", "zu"};

}  // namespace

bool is_wellformed_language_code(std::string_view code) noexcept {
  return code.size() == 2 && std::all_of(code.begin(), code.end(),
                                         [](char c) { return c >= 'a' && c <= 'z'; });
}

bool is_known_language(std::string_view code) noexcept {
  return std::binary_search(kIso6391.begin(), kIso6391.end(), code);
}

void check_language_code(std::string_view code) {
  if (!is_wellformed_language_code(code)) {
    throw Error(ErrorCode::parse,
                "invalid language code \"" + std::string(code) + "\" (expected two lowercase letters)");
  }
  if (is_known_language(code)) return;

  static std::mutex mu;
  static std::set<std::string, std::less<>> warned;
  std::lock_guard lock(mu);
  if (warned.insert(std::string(code)).second) {
    warn("unknown language code \"" + std::string(code) + "\"");
  }
}

}  // namespace normprobe
