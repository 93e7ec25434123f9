#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>

namespace qgsnet {

/// 64-bit FNV-1a over a byte string. Used for config and layout digests;
/// stable across platforms and runs.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string digest_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string digest_of(std::string_view data) {
  return digest_hex(fnv1a64(data));
}

}  // namespace qgsnet
