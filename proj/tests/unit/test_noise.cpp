#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "nmtune/error.hpp"
#include "nmtune/noise.hpp"

using nmtune::Label;

namespace {

std::vector<Label> balanced(std::size_t n, std::size_t c) {
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<Label>(i % c);
  return y;
}

// Counts changed positions directly, independent of the mask.
std::size_t changed(const std::vector<Label>& a, const std::vector<Label>& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

}  // namespace

TEST(FlipSymmetric, GammaZeroIsIdentity) {
  const auto y = balanced(50, 5);
  const auto r = nmtune::flip_symmetric(y, 5, 0.0, 1);
  EXPECT_EQ(r.labels, y);
  EXPECT_EQ(r.flipped(), 0u);
}

TEST(FlipSymmetric, GammaOneChangesEverything) {
  const auto y = balanced(97, 4);
  const auto r = nmtune::flip_symmetric(y, 4, 1.0, 3);
  EXPECT_EQ(changed(y, r.labels), 97u);
}

TEST(FlipSymmetric, ExactCountAndUniformTargets) {
  const auto y = balanced(1000, 10);
  const auto r = nmtune::flip_symmetric(y, 10, 0.2, 42);
  EXPECT_EQ(changed(y, r.labels), 200u);
  std::size_t mask_count = 0;
  std::vector<double> target(10, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_EQ(r.flip_mask[i] != 0, y[i] != r.labels[i]);
    mask_count += r.flip_mask[i];
    if (r.flip_mask[i]) target[r.labels[i]] += 1;
  }
  EXPECT_EQ(mask_count, 200u);
  // chi-square against 20 expected per class, 9 degrees of freedom, p = 0.001
  double chi2 = 0;
  for (double t : target) chi2 += (t - 20.0) * (t - 20.0) / 20.0;
  EXPECT_LT(chi2, 27.88);
}

TEST(FlipSymmetric, CountsAcrossGrid) {
  for (std::size_t n : {1u, 7u, 100u, 333u, 1000u}) {
    for (std::size_t c : {2u, 3u, 10u}) {
      for (double g : {0.0, 0.05, 0.10, 0.20, 0.30, 0.5, 1.0}) {
        const auto y = balanced(n, c);
        const auto r = nmtune::flip_symmetric(y, c, g, n * 31 + c);
        EXPECT_EQ(changed(y, r.labels), static_cast<std::size_t>(std::llround(g * n)))
            << "N=" << n << " C=" << c << " gamma=" << g;
      }
    }
  }
}

TEST(FlipSymmetric, Errors) {
  const std::vector<Label> y{0, 0};
  try {
    nmtune::flip_symmetric(y, 1, 0.5, 0);
    FAIL();
  } catch (const nmtune::Error& e) {
    EXPECT_EQ(e.kind(), nmtune::ErrorKind::kCannotFlip);
  }
  EXPECT_THROW(nmtune::flip_symmetric(y, 2, 1.5, 0), nmtune::Error);
  try {
    nmtune::flip_symmetric(std::vector<Label>{0, 5}, 3, 0.1, 0);
    FAIL();
  } catch (const nmtune::Error& e) {
    EXPECT_EQ(e.kind(), nmtune::ErrorKind::kLabelError);
  }
}

TEST(FlipSymmetric, SeedSensitive) {
  const auto y = balanced(200, 5);
  EXPECT_EQ(nmtune::flip_symmetric(y, 5, 0.3, 1).labels, nmtune::flip_symmetric(y, 5, 0.3, 1).labels);
  EXPECT_NE(nmtune::flip_symmetric(y, 5, 0.3, 1).labels, nmtune::flip_symmetric(y, 5, 0.3, 2).labels);
}

TEST(FlipAsymmetric, FullSubsetReducesToSymmetric) {
  const auto y = balanced(300, 6);
  const std::vector<Label> all{5, 4, 3, 2, 1, 0};
  EXPECT_EQ(nmtune::flip_asymmetric(y, 6, 0.25, all, 9).labels,
            nmtune::flip_symmetric(y, 6, 0.25, 9).labels);
}

TEST(FlipAsymmetric, DisjointLabelsUnchanged) {
  const std::vector<Label> y(40, 0);
  const std::vector<Label> subset{1, 2};
  EXPECT_EQ(nmtune::flip_asymmetric(y, 3, 0.9, subset, 4).labels, y);
}

TEST(FlipAsymmetric, StaysInsideSubset) {
  // 500 samples, 100 of them in classes {3, 4}
  std::vector<Label> y(500);
  for (std::size_t i = 0; i < 500; ++i) y[i] = i < 100 ? static_cast<Label>(3 + i % 2) : static_cast<Label>(i % 3);
  const std::vector<Label> subset{3, 4};
  const auto r = nmtune::flip_asymmetric(y, 5, 0.1, subset, 11);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < 500; ++i) {
    if (y[i] == r.labels[i]) continue;
    ++flips;
    EXPECT_LT(i, 100u);
    EXPECT_TRUE(r.labels[i] == 3 || r.labels[i] == 4);
  }
  EXPECT_EQ(flips, 10u);
}

TEST(SwapPairs, GammaZeroIsIdentity) {
  const auto p = nmtune::swap_pairs(10, 0.0, 1);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(p[i], i);
}

TEST(SwapPairs, InvolutionWithExactMoves) {
  const auto p = nmtune::swap_pairs(100, 0.3, 9);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(p[p[i]], i);
    moved += p[i] != i;
  }
  EXPECT_EQ(moved, 30u);
}

TEST(SwapPairs, OddPoolCapsAtEven) {
  const auto p = nmtune::swap_pairs(5, 1.0, 3);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < 5; ++i) moved += p[i] != i;
  EXPECT_EQ(moved, 4u);
}

TEST(ApplyNoise, PairSwapPermutesLabels) {
  const auto y = balanced(20, 20);  // distinct labels
  const nmtune::NoiseSpec spec{nmtune::NoiseKind::kPairSwap, 0.5, {}, 7};
  const auto r = nmtune::apply_noise(y, 20, spec);
  EXPECT_EQ(r.flipped(), 10u);
  EXPECT_EQ(std::multiset<Label>(y.begin(), y.end()),
            std::multiset<Label>(r.labels.begin(), r.labels.end()));
}

TEST(ApplyNoise, AsymmetricNeedsSubset) {
  const nmtune::NoiseSpec spec{nmtune::NoiseKind::kAsymmetric, 0.1, {}, 0};
  EXPECT_THROW(spec.validate(), nmtune::Error);
  EXPECT_EQ(nmtune::parse_noise_kind("pair_swap"), nmtune::NoiseKind::kPairSwap);
  EXPECT_THROW(nmtune::parse_noise_kind("bogus"), nmtune::Error);
}
