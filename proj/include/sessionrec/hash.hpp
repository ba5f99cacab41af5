#pragma once

#include <cstdint>
#include <string_view>

namespace sessionrec {

// FNV-1a, 64-bit. Used for config and dataset fingerprints.
constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : text) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace sessionrec
