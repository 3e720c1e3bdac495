#pragma once

#include <cstddef>

#include "nmtune/matrix.hpp"

namespace nmtune {

/// How the consistency term normalizes F and Z before comparing them.
enum class MseNormalization {
  kPerRow,      ///< each sample scaled to unit L2 norm; squared error averaged over rows
  kFrobenius,   ///< whole matrix scaled to unit Frobenius norm; summed squared error
};

struct NmTuneConfig {
  double lambda = 0.01;
  double w_mse = 1.0;
  double w_cov = 1.0;
  double w_svd = 1.0;
  std::size_t batch_min = 2;
  MseNormalization mse_normalization = MseNormalization::kPerRow;

  void validate() const;
};

/// A scalar loss together with its gradient with respect to Z.
struct LossWithGrad {
  double value = 0.0;
  Matrix grad_z;
};

/// Consistency between normalized frozen features F and transformed Z. F is
/// treated as constant. Zero rows of Z get a zero gradient.
LossWithGrad mse_consistency(const FeatureMatrix& f, const FeatureMatrix& z,
                             MseNormalization mode = MseNormalization::kPerRow);

/// (1/D) * sum of squared off-diagonal entries of covariance(z).
/// Throws DegenerateSample when z has fewer than batch_min rows.
LossWithGrad covariance_penalty(const FeatureMatrix& z, std::size_t batch_min = 2);

/// -sigma_1 / sum_j sigma_j. Throws DegenerateTopSingularValue when
/// sigma_1 - sigma_2 < 1e-9 * sigma_1 and ZeroSpectrum for z == 0.
LossWithGrad dominant_sv_penalty(const FeatureMatrix& z);

/// Relative gap below which the top singular value counts as repeated.
inline constexpr double kTopGapTolerance = 1e-9;

struct NmTuneTotal {
  double value = 0.0;         ///< ce + lambda * weighted regularizers
  Matrix grad_z;              ///< ce_grad_z + lambda * weighted regularizer gradients
  double mse = 0.0;           ///< unweighted per-term values (0 when skipped)
  double cov = 0.0;
  double svd = 0.0;
  bool cov_skipped = false;   ///< batch smaller than batch_min
  bool svd_skipped = false;   ///< small batch or repeated top singular value
};

/// Assembles the total objective L_CE + lambda * (w_mse L_MSE + w_cov L_COV +
/// w_svd L_SVD). `ce_grad_z` is the cross-entropy gradient that reached Z
/// through the classifier. Terms with zero weight (or lambda == 0) are not
/// evaluated, so the degenerate configuration returns ce_value and ce_grad_z
/// unchanged.
NmTuneTotal nmtune_total(double ce_value, const Matrix& ce_grad_z, const FeatureMatrix& f,
                         const FeatureMatrix& z, const NmTuneConfig& cfg);

}  // namespace nmtune
