#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nmtune {

using Rng = std::mt19937_64;

/// Independent stream derived from a base seed and a purpose tag, so that
/// e.g. initialization and shuffling never share draws.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

inline Rng make_rng(std::uint64_t base, std::string_view tag) {
  return Rng(derive_seed(base, tag));
}

}  // namespace nmtune
