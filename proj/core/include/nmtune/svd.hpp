#pragma once

#include <vector>

#include "nmtune/matrix.hpp"

namespace nmtune {

/// Thin singular value decomposition F = U diag(sigma) V^T with r = min(M, D).
struct SvdResult {
  Matrix u;                   ///< M x r, orthonormal columns
  std::vector<double> sigma;  ///< r values, descending, >= 0
  Matrix vt;                  ///< r x D, orthonormal rows

  std::size_t rank() const noexcept;  ///< count of nonzero singular values
};

/// Singular values below this fraction of sigma_1 are reported as exactly 0.
inline constexpr double kSingularValueClamp = 1e-12;

/// One-sided Jacobi SVD (Householder QR first when the matrix is tall).
/// Deterministic for identical input bits. Throws InvalidInput on
/// non-finite or empty input.
SvdResult svd(const FeatureMatrix& f);

/// Same singular values as svd(f).sigma without forming U or V.
std::vector<double> singular_values(const FeatureMatrix& f);

}  // namespace nmtune
