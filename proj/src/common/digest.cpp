#include "iad/common/digest.hpp"

#include <bit>
#include <cstdio>

namespace iad {

void Fnv1a::update(std::span<const std::uint8_t> bytes) {
  for (std::uint8_t b : bytes) {
    hash_ ^= b;
    hash_ *= 0x100000001b3ULL;
  }
}

void Fnv1a::update(std::string_view text) {
  update(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void Fnv1a::update_u64(std::uint64_t value) {
  std::uint8_t bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>(value >> (8 * i));
  update(bytes);
}

void Fnv1a::update_double(double value) {
  update_u64(std::bit_cast<std::uint64_t>(value));
}

std::string Fnv1a::hex() const { return to_hex(hash_); }

std::string to_hex(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(value));
  return buffer;
}

}  // namespace iad
