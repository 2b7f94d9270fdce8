#include "floodlens/hash.hpp"

#include <openssl/evp.h>

#include <fstream>

#include "floodlens/util.hpp"

namespace floodlens {

Sha256Digest sha256(std::string_view data) {
  Sha256Digest out{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("sha256: EVP context allocation failed");
  if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, out.data(), &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: digest computation failed");
  }
  EVP_MD_CTX_free(ctx);
  return out;
}

std::string to_hex(const Sha256Digest& digest) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (unsigned char b : digest) {
    out += hex[b >> 4];
    out += hex[b & 0xf];
  }
  return out;
}

std::string sha256_hex(std::string_view data) { return to_hex(sha256(data)); }

std::string sha256_file_hex(const std::string& path) {
  return sha256_hex(read_file(path));
}

}  // namespace floodlens
