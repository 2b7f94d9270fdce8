// hash.hpp -- FNV-1a string hashing and SHA-256 digests.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace floodlens {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

using Sha256Digest = std::array<unsigned char, 32>;

Sha256Digest sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::string& path);
std::string to_hex(const Sha256Digest& digest);

}  // namespace floodlens
