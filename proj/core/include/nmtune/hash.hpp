#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace nmtune {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);
/// First eight digest bytes, little-endian.
std::uint64_t sha256_u64(std::string_view bytes);

}  // namespace nmtune
