#include <algorithm>
#include <map>

#include "normprobe/embedding_io.hpp"
#include "normprobe/error.hpp"

namespace normprobe {

namespace {

std::map<std::string_view, std::size_t> index_ids(std::span<const std::string> ids, const char* side) {
  std::map<std::string_view, std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!out.emplace(ids[i], i).second) {
      throw Error(ErrorCode::duplicate,
                  std::string("duplicate id \"") + ids[i] + "\" on " + side + " side");
    }
  }
  return out;
}

std::string join(const std::vector<std::string_view>& ids) {
  std::string out;
  for (auto id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

}  // namespace

std::vector<IndexPair> align_by_id(std::span<const std::string> left_ids,
                                   std::span<const std::string> right_ids, AlignMode mode) {
  auto left = index_ids(left_ids, "left");
  auto right = index_ids(right_ids, "right");

  std::vector<IndexPair> pairs;
  std::vector<std::string_view> missing_right;
  std::vector<std::string_view> missing_left;
  for (const auto& [id, i] : left) {
    auto it = right.find(id);
    if (it == right.end()) {
      missing_right.push_back(id);
    } else {
      pairs.push_back({i, it->second});
    }
  }
  for (const auto& [id, _] : right) {
    if (!left.contains(id)) missing_left.push_back(id);
  }

  if (mode == AlignMode::strict && (!missing_left.empty() || !missing_right.empty())) {
    std::string msg = "missing: ";
    if (!missing_right.empty()) msg += join(missing_right) + " (right)";
    if (!missing_left.empty()) {
      if (!missing_right.empty()) msg += ", ";
      msg += join(missing_left) + " (left)";
    }
    throw Error(ErrorCode::alignment, msg);
  }
  return pairs;
}

}  // namespace normprobe
