#include "nmtune/regularizers.hpp"

#include <cmath>
#include <sstream>

#include "nmtune/error.hpp"
#include "nmtune/svd.hpp"

namespace nmtune {

namespace {

void require_same_shape(const Matrix& f, const Matrix& z) {
  if (f.rows() != z.rows() || f.cols() != z.cols()) {
    std::ostringstream msg;
    msg << "consistency term needs equal shapes, got " << f.rows() << "x" << f.cols() << " and "
        << z.rows() << "x" << z.cols();
    fail(ErrorKind::kShapeError, msg.str());
  }
}

LossWithGrad mse_per_row(const Matrix& f, const Matrix& z) {
  const std::size_t m = z.rows(), d = z.cols();
  const double inv_m = 1.0 / static_cast<double>(m);
  LossWithGrad out{0.0, Matrix(m, d)};
  std::vector<double> fh(d), zh(d);
  for (std::size_t r = 0; r < m; ++r) {
    const auto fr = f.row(r);
    const auto zr = z.row(r);
    const double fn = norm2(fr), zn = norm2(zr);
    for (std::size_t c = 0; c < d; ++c) {
      fh[c] = fn > 0.0 ? fr[c] / fn : 0.0;
      zh[c] = zn > 0.0 ? zr[c] / zn : 0.0;
    }
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) sq += (fh[c] - zh[c]) * (fh[c] - zh[c]);
    out.value += sq;
    if (zn == 0.0) continue;
    // d/dz of ||fh - z/|z|||^2 = -2 (I - zh zh^T) fh / |z|
    const double proj = dot(zh, fh);
    auto g = out.grad_z.row(r);
    for (std::size_t c = 0; c < d; ++c) g[c] = -2.0 * inv_m * (fh[c] - proj * zh[c]) / zn;
  }
  out.value *= inv_m;
  return out;
}

LossWithGrad mse_frobenius(const Matrix& f, const Matrix& z) {
  const double fn = frobenius_norm(f), zn = frobenius_norm(z);
  LossWithGrad out{0.0, Matrix(z.rows(), z.cols())};
  const auto fv = f.values();
  const auto zv = z.values();
  double proj = 0.0;
  for (std::size_t i = 0; i < zv.size(); ++i) {
    const double fh = fn > 0.0 ? fv[i] / fn : 0.0;
    const double zh = zn > 0.0 ? zv[i] / zn : 0.0;
    out.value += (fh - zh) * (fh - zh);
    proj += fh * zh;
  }
  if (zn == 0.0) return out;
  auto g = out.grad_z.values();
  for (std::size_t i = 0; i < zv.size(); ++i) {
    const double fh = fn > 0.0 ? fv[i] / fn : 0.0;
    g[i] = -2.0 * (fh - proj * zv[i] / zn) / zn;
  }
  return out;
}

}  // namespace

void NmTuneConfig::validate() const {
  if (!(lambda >= 0.0) || !(w_mse >= 0.0) || !(w_cov >= 0.0) || !(w_svd >= 0.0)) {
    fail(ErrorKind::kConfigError, "nmtune weights must be non-negative");
  }
  if (batch_min < 2) fail(ErrorKind::kConfigError, "nmtune batch_min must be at least 2");
}

LossWithGrad mse_consistency(const FeatureMatrix& f, const FeatureMatrix& z,
                             MseNormalization mode) {
  require_same_shape(f, z);
  if (z.rows() == 0) fail(ErrorKind::kInvalidInput, "consistency term needs at least one row");
  return mode == MseNormalization::kPerRow ? mse_per_row(f, z) : mse_frobenius(f, z);
}

LossWithGrad covariance_penalty(const FeatureMatrix& z, std::size_t batch_min) {
  if (z.rows() < std::max<std::size_t>(batch_min, 2)) {
    fail(ErrorKind::kDegenerateSample, "covariance term needs at least " +
                                           std::to_string(std::max<std::size_t>(batch_min, 2)) +
                                           " rows, got " + std::to_string(z.rows()));
  }
  const std::size_t m = z.rows(), d = z.cols();
  const Matrix zc = centered(z);
  Matrix cov = matmul_at(zc, zc);
  cov *= 1.0 / static_cast<double>(m - 1);

  // Off-diagonal part; symmetrized so the gradient is exactly symmetric in C.
  Matrix off(d, d);
  double value = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      const double c = 0.5 * (cov(i, j) + cov(j, i));
      off(i, j) = c;
      value += c * c;
    }
  }
  value /= static_cast<double>(d);

  // dL/dC = (2/D) C_off; dL/dZ = (2/(M-1)) Zc dL/dC (centering drops out).
  Matrix grad = matmul(zc, off);
  grad *= 4.0 / (static_cast<double>(d) * static_cast<double>(m - 1));
  return {value, std::move(grad)};
}

LossWithGrad dominant_sv_penalty(const FeatureMatrix& z) {
  const SvdResult s = svd(z);
  double total = 0.0;
  for (double v : s.sigma) total += v;
  if (total <= 0.0) fail(ErrorKind::kZeroSpectrum, "dominant singular value term on zero matrix");
  const double top = s.sigma.front();
  if (s.sigma.size() > 1 && top - s.sigma[1] < kTopGapTolerance * top) {
    fail(ErrorKind::kDegenerateTopSingularValue, "top singular value is not simple");
  }

  const std::size_t rank = s.rank();
  const std::size_t m = z.rows(), d = z.cols();
  // sum_j u_j v_j^T over the numerical rank, and u_1 v_1^T.
  Matrix basis_sum(m, d);
  for (std::size_t j = 0; j < rank; ++j) {
    for (std::size_t r = 0; r < m; ++r) {
      const double uj = s.u(r, j);
      if (uj == 0.0) continue;
      auto out = basis_sum.row(r);
      const auto vj = s.vt.row(j);
      for (std::size_t c = 0; c < d; ++c) out[c] += uj * vj[c];
    }
  }
  Matrix grad(m, d);
  const double inv_sq = 1.0 / (total * total);
  for (std::size_t r = 0; r < m; ++r) {
    const double u1 = s.u(r, 0);
    const auto v1 = s.vt.row(0);
    auto g = grad.row(r);
    const auto b = basis_sum.row(r);
    for (std::size_t c = 0; c < d; ++c) g[c] = -(u1 * v1[c] * total - top * b[c]) * inv_sq;
  }
  return {-top / total, std::move(grad)};
}

NmTuneTotal nmtune_total(double ce_value, const Matrix& ce_grad_z, const FeatureMatrix& f,
                         const FeatureMatrix& z, const NmTuneConfig& cfg) {
  cfg.validate();
  if (ce_grad_z.rows() != z.rows() || ce_grad_z.cols() != z.cols()) {
    fail(ErrorKind::kShapeError, "cross-entropy gradient does not match Z");
  }
  NmTuneTotal out;
  out.value = ce_value;
  out.grad_z = ce_grad_z;
  if (cfg.lambda == 0.0) return out;

  double reg = 0.0;
  Matrix reg_grad(z.rows(), z.cols());
  bool any = false;
  if (cfg.w_mse > 0.0) {
    const LossWithGrad t = mse_consistency(f, z, cfg.mse_normalization);
    out.mse = t.value;
    reg += cfg.w_mse * t.value;
    reg_grad.axpy(cfg.w_mse, t.grad_z);
    any = true;
  }
  const bool small_batch = z.rows() < cfg.batch_min;
  if (cfg.w_cov > 0.0) {
    if (small_batch) {
      out.cov_skipped = true;
    } else {
      const LossWithGrad t = covariance_penalty(z, cfg.batch_min);
      out.cov = t.value;
      reg += cfg.w_cov * t.value;
      reg_grad.axpy(cfg.w_cov, t.grad_z);
      any = true;
    }
  }
  if (cfg.w_svd > 0.0) {
    if (small_batch) {
      out.svd_skipped = true;
    } else {
      try {
        const LossWithGrad t = dominant_sv_penalty(z);
        out.svd = t.value;
        reg += cfg.w_svd * t.value;
        reg_grad.axpy(cfg.w_svd, t.grad_z);
        any = true;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDegenerateTopSingularValue) throw;
        out.svd_skipped = true;
      }
    }
  }
  if (!any) return out;
  out.value = ce_value + cfg.lambda * reg;
  out.grad_z.axpy(cfg.lambda, reg_grad);
  return out;
}

}  // namespace nmtune
