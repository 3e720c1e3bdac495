#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nmtune/dataset.hpp"

namespace nmtune {

enum class NoiseKind { kSymmetric, kAsymmetric, kPairSwap };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);  ///< "symmetric", "asymmetric", "pair_swap"

/// Controlled corruption of supervision. `ratio` is the pre-training noise
/// ratio (gamma) or the downstream one (eta), depending on where it is used.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::kSymmetric;
  double ratio = 0.0;
  std::vector<Label> subset;  ///< asymmetric only
  std::uint64_t seed = 0;

  void validate() const;
};

struct FlipResult {
  std::vector<Label> labels;
  std::vector<std::uint8_t> flip_mask;  ///< 1 where the label changed

  std::size_t flipped() const;
};

/// Flips exactly round(gamma * N) labels, chosen uniformly without
/// replacement, each to a uniform draw over the other C - 1 classes.
FlipResult flip_symmetric(std::span<const Label> labels, std::size_t num_classes, double gamma,
                          std::uint64_t seed);

/// Like flip_symmetric, restricted to samples whose label is in `subset`;
/// flipped labels stay inside the subset.
FlipResult flip_asymmetric(std::span<const Label> labels, std::size_t num_classes, double gamma,
                           std::span<const Label> subset, std::uint64_t seed);

/// A product of disjoint transpositions over [0, pair_count) moving the even
/// count nearest to gamma * pair_count; perm[i] is the partner of i (or i).
std::vector<std::size_t> swap_pairs(std::size_t pair_count, double gamma, std::uint64_t seed);

/// Dispatches on spec.kind. For pair_swap the labels are permuted by
/// swap_pairs (both members of a swapped pair count as noisy).
FlipResult apply_noise(std::span<const Label> labels, std::size_t num_classes,
                       const NoiseSpec& spec);

}  // namespace nmtune
