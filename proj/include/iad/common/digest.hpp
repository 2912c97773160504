#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace iad {

// 64-bit FNV-1a. Used for state digests, observation digests and checkpoint
// checksums; not a cryptographic hash.
class Fnv1a {
 public:
  void update(std::span<const std::uint8_t> bytes);
  void update(std::string_view text);
  void update_u64(std::uint64_t value);
  void update_double(double value);

  std::uint64_t value() const { return hash_; }
  std::string hex() const;

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

}  // namespace iad
