#include "nmtune/hash.hpp"

#include <openssl/sha.h>

#include <string>

#include "nmtune/rng.hpp"

namespace nmtune {

Sha256Digest sha256(std::string_view bytes) {
  Sha256Digest out{};
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), out.data());
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  const Sha256Digest d = sha256(bytes);
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : d) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

std::uint64_t sha256_u64(std::string_view bytes) {
  const Sha256Digest d = sha256(bytes);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | d[static_cast<std::size_t>(i)];
  return v;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::string key = std::to_string(base);
  key.push_back(':');
  key.append(tag);
  return sha256_u64(key);
}

}  // namespace nmtune
