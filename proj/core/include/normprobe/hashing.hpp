#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace normprobe {

/// Incremental SHA-256 producing lowercase hex.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::byte> bytes);
  Sha256& update(std::string_view text);
  Sha256& update_u64(std::uint64_t value);     // little-endian
  Sha256& update_f64(double value);            // IEEE-754 binary64, little-endian
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(std::string_view data);

}  // namespace normprobe
