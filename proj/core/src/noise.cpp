#include "nmtune/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nmtune/error.hpp"
#include "nmtune/rng.hpp"

namespace nmtune {

namespace {

void require_ratio(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    fail(ErrorKind::kInvalidInput, "noise ratio must lie in [0, 1], got " + std::to_string(gamma));
  }
}

std::size_t exact_count(double gamma, std::size_t n) {
  const auto k = static_cast<std::size_t>(std::llround(gamma * static_cast<double>(n)));
  return std::min(k, n);
}

// First k entries of `pool` become a uniform sample without replacement.
void partial_shuffle(std::vector<std::size_t>& pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
}

// Shared by the symmetric and asymmetric flips so that a subset covering every
// class reproduces flip_symmetric exactly.
FlipResult flip_within(std::span<const Label> labels, double gamma,
                       const std::vector<Label>& classes, std::uint64_t seed) {
  FlipResult out{std::vector<Label>(labels.begin(), labels.end()),
                 std::vector<std::uint8_t>(labels.size(), 0)};
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::binary_search(classes.begin(), classes.end(), labels[i])) eligible.push_back(i);
  }
  const std::size_t k = exact_count(gamma, eligible.size());
  if (k == 0) return out;

  Rng rng = make_rng(seed, "label-flip");
  partial_shuffle(eligible, k, rng);
  std::uniform_int_distribution<std::size_t> other(0, classes.size() - 2);
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t i = eligible[t];
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
    std::size_t r = other(rng);
    if (r >= pos) ++r;
    out.labels[i] = classes[r];
    out.flip_mask[i] = 1;
  }
  return out;
}

}  // namespace

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kSymmetric: return "symmetric";
    case NoiseKind::kAsymmetric: return "asymmetric";
    case NoiseKind::kPairSwap: return "pair_swap";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "symmetric") return NoiseKind::kSymmetric;
  if (name == "asymmetric") return NoiseKind::kAsymmetric;
  if (name == "pair_swap") return NoiseKind::kPairSwap;
  fail(ErrorKind::kConfigError, "unknown noise kind '" + std::string(name) + "'");
}

void NoiseSpec::validate() const {
  require_ratio(ratio);
  if (kind == NoiseKind::kAsymmetric && subset.empty()) {
    fail(ErrorKind::kConfigError, "asymmetric noise needs a nonempty class subset");
  }
}

std::size_t FlipResult::flipped() const {
  return static_cast<std::size_t>(std::count(flip_mask.begin(), flip_mask.end(), 1));
}

FlipResult flip_symmetric(std::span<const Label> labels, std::size_t num_classes, double gamma,
                          std::uint64_t seed) {
  require_ratio(gamma);
  validate_labels(labels, num_classes);
  if (gamma > 0.0 && num_classes < 2) {
    fail(ErrorKind::kCannotFlip, "need at least 2 classes to flip labels");
  }
  std::vector<Label> classes(num_classes);
  std::iota(classes.begin(), classes.end(), 0);
  return flip_within(labels, gamma, classes, seed);
}

FlipResult flip_asymmetric(std::span<const Label> labels, std::size_t num_classes, double gamma,
                           std::span<const Label> subset, std::uint64_t seed) {
  require_ratio(gamma);
  validate_labels(labels, num_classes);
  for (Label c : subset) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      fail(ErrorKind::kInvalidInput, "subset class " + std::to_string(c) + " out of range");
    }
  }
  std::vector<Label> classes(subset.begin(), subset.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (gamma > 0.0 && classes.size() < 2) {
    fail(ErrorKind::kCannotFlip, "asymmetric noise needs at least 2 subset classes");
  }
  return flip_within(labels, gamma, classes, seed);
}

std::vector<std::size_t> swap_pairs(std::size_t pair_count, double gamma, std::uint64_t seed) {
  require_ratio(gamma);
  std::vector<std::size_t> perm(pair_count);
  std::iota(perm.begin(), perm.end(), 0);
  if (gamma == 0.0) return perm;
  if (pair_count < 2) fail(ErrorKind::kCannotFlip, "need at least 2 pairs to swap");

  const double target = gamma * static_cast<double>(pair_count);
  std::size_t moved = 2 * static_cast<std::size_t>(std::llround(target / 2.0));
  moved = std::min(moved, pair_count - pair_count % 2);
  if (moved == 0) return perm;

  Rng rng = make_rng(seed, "pair-swap");
  std::vector<std::size_t> pool(pair_count);
  std::iota(pool.begin(), pool.end(), 0);
  partial_shuffle(pool, moved, rng);
  for (std::size_t t = 0; t < moved; t += 2) {
    perm[pool[t]] = pool[t + 1];
    perm[pool[t + 1]] = pool[t];
  }
  return perm;
}

FlipResult apply_noise(std::span<const Label> labels, std::size_t num_classes,
                       const NoiseSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case NoiseKind::kSymmetric:
      return flip_symmetric(labels, num_classes, spec.ratio, spec.seed);
    case NoiseKind::kAsymmetric:
      return flip_asymmetric(labels, num_classes, spec.ratio, spec.subset, spec.seed);
    case NoiseKind::kPairSwap: {
      validate_labels(labels, num_classes);
      const auto perm = swap_pairs(labels.size(), spec.ratio, spec.seed);
      FlipResult out{std::vector<Label>(labels.size()),
                     std::vector<std::uint8_t>(labels.size(), 0)};
      for (std::size_t i = 0; i < labels.size(); ++i) {
        out.labels[i] = labels[perm[i]];
        out.flip_mask[i] = perm[i] != i ? 1 : 0;
      }
      return out;
    }
  }
  fail(ErrorKind::kConfigError, "unhandled noise kind");
}

}  // namespace nmtune
