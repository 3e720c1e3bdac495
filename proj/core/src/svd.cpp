#include "nmtune/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nmtune/error.hpp"

namespace nmtune {

namespace {

// Columns are stored as rows ("panel" layout) so every Jacobi rotation and
// Householder update touches contiguous memory.
struct Panel {
  std::size_t count = 0;   // number of columns
  std::size_t length = 0;  // length of each column
  std::vector<double> data;

  double* col(std::size_t j) { return data.data() + j * length; }
  const double* col(std::size_t j) const { return data.data() + j * length; }
};

Panel panel_from_columns(const Matrix& a) {
  Panel p{a.cols(), a.rows(), std::vector<double>(a.size())};
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) p.data[c * p.length + r] = a(r, c);
  }
  return p;
}

double dot_n(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

constexpr double kEps = 2.220446049250313e-16;
constexpr int kMaxSweeps = 80;

// Householder QR of the column panel `a` (count = n columns of length m,
// m > n). Overwrites `a` with R in its leading n x n block and returns the
// reflector vectors (reflector j has length m - j).
std::vector<std::vector<double>> householder_qr(Panel& a) {
  const std::size_t m = a.length, n = a.count;
  std::vector<std::vector<double>> reflectors(n);
  for (std::size_t j = 0; j < n; ++j) {
    double* x = a.col(j) + j;
    const std::size_t len = m - j;
    const double xnorm = std::sqrt(dot_n(x, x, len));
    std::vector<double> v(x, x + len);
    if (xnorm == 0.0) {
      reflectors[j] = std::vector<double>(len, 0.0);
      continue;
    }
    const double alpha = x[0] >= 0.0 ? -xnorm : xnorm;
    v[0] -= alpha;
    const double vnorm = std::sqrt(dot_n(v.data(), v.data(), len));
    for (double& e : v) e /= vnorm;
    for (std::size_t c = j; c < n; ++c) {
      double* y = a.col(c) + j;
      const double proj = 2.0 * dot_n(v.data(), y, len);
      for (std::size_t i = 0; i < len; ++i) y[i] -= proj * v[i];
    }
    reflectors[j] = std::move(v);
  }
  return reflectors;
}

// Q (m x n) of a Householder QR, as a column panel.
Panel form_q(const std::vector<std::vector<double>>& reflectors, std::size_t m) {
  const std::size_t n = reflectors.size();
  Panel q{n, m, std::vector<double>(n * m, 0.0)};
  for (std::size_t c = 0; c < n; ++c) q.col(c)[c] = 1.0;
  for (std::size_t jj = n; jj-- > 0;) {
    const auto& v = reflectors[jj];
    const std::size_t len = v.size();
    for (std::size_t c = 0; c < n; ++c) {
      double* y = q.col(c) + jj;
      const double proj = 2.0 * dot_n(v.data(), y, len);
      if (proj == 0.0) continue;
      for (std::size_t i = 0; i < len; ++i) y[i] -= proj * v[i];
    }
  }
  return q;
}

// Orthogonalizes the columns of `w` in place (one-sided Jacobi); applies the
// same rotations to `v` when non-null.
void jacobi_orthogonalize(Panel& w, Panel* v) {
  const std::size_t n = w.count, len = w.length;
  const double tol = kEps * static_cast<double>(std::max<std::size_t>(len, 1));
  std::vector<double> sq(n);
  for (std::size_t j = 0; j < n; ++j) sq[j] = dot_n(w.col(j), w.col(j), len);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = sq[p], beta = sq[q];
        if (alpha == 0.0 || beta == 0.0) continue;
        double* wp = w.col(p);
        double* wq = w.col(q);
        const double gamma = dot_n(wp, wq, len);
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < len; ++i) {
          const double a = wp[i], b = wq[i];
          wp[i] = c * a - s * b;
          wq[i] = s * a + c * b;
        }
        if (v != nullptr) {
          double* vp = v->col(p);
          double* vq = v->col(q);
          for (std::size_t i = 0; i < v->length; ++i) {
            const double a = vp[i], b = vq[i];
            vp[i] = c * a - s * b;
            vq[i] = s * a + c * b;
          }
        }
        sq[p] = dot_n(wp, wp, len);
        sq[q] = dot_n(wq, wq, len);
      }
    }
    if (!rotated) break;
  }
}

// Descending order of values; ties keep the original column order.
std::vector<std::size_t> descending_order(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

void clamp_small(std::vector<double>& sigma) {
  if (sigma.empty()) return;
  const double cutoff = kSingularValueClamp * sigma.front();
  for (double& s : sigma) {
    if (s < cutoff) s = 0.0;
  }
}

// Makes unit column j of `u` orthogonal to columns [0, j) by two passes of
// modified Gram-Schmidt. When the column is (numerically) in their span, the
// first standard basis vector that is not gets used instead. The column is
// left in `u` normalized.
void orthonormalize_against(Panel& u, std::size_t j) {
  const std::size_t len = u.length;
  double* x = u.col(j);
  auto project_out = [&](double* y) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        const double* e = u.col(k);
        const double proj = dot_n(e, y, len);
        for (std::size_t i = 0; i < len; ++i) y[i] -= proj * e[i];
      }
    }
    return std::sqrt(dot_n(y, y, len));
  };
  double nrm = std::sqrt(dot_n(x, x, len));
  if (nrm > 0.0) {
    for (std::size_t i = 0; i < len; ++i) x[i] /= nrm;
    nrm = project_out(x);
  }
  for (std::size_t basis = 0; nrm < 0.5 && basis < len; ++basis) {
    std::fill(x, x + len, 0.0);
    x[basis] = 1.0;
    nrm = project_out(x);
  }
  for (std::size_t i = 0; i < len; ++i) x[i] /= nrm;
}

// SVD of a matrix with rows >= cols.
SvdResult svd_tall(const Matrix& a, bool want_vectors) {
  const std::size_t m = a.rows(), n = a.cols();
  Panel w = panel_from_columns(a);

  std::vector<std::vector<double>> reflectors;
  if (m > n) {
    reflectors = householder_qr(w);
    // Keep only the n x n upper-triangular R.
    Panel r{n, n, std::vector<double>(n * n, 0.0)};
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t i = 0; i <= c; ++i) r.col(c)[i] = w.col(c)[i];
    }
    w = std::move(r);
  }

  Panel v{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t c = 0; c < n; ++c) v.col(c)[c] = 1.0;
  jacobi_orthogonalize(w, want_vectors ? &v : nullptr);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot_n(w.col(j), w.col(j), w.length));
  const auto order = descending_order(norms);

  SvdResult out;
  out.sigma.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.sigma[k] = norms[order[k]];
  clamp_small(out.sigma);
  if (!want_vectors) return out;

  // Left vectors of the (possibly reduced) problem, sorted.
  Panel u{n, w.length, std::vector<double>(n * w.length, 0.0)};
  const double sigma1 = out.sigma.empty() ? 0.0 : out.sigma.front();
  for (std::size_t k = 0; k < n; ++k) {
    const double* src = w.col(order[k]);
    double* dst = u.col(k);
    if (out.sigma[k] > 0.0) {
      for (std::size_t i = 0; i < w.length; ++i) dst[i] = src[i] / norms[order[k]];
    }
    // Small singular values lose orthogonality in w/sigma; clean them up.
    if (out.sigma[k] == 0.0 || out.sigma[k] < 1e-6 * sigma1) orthonormalize_against(u, k);
  }

  if (m > n) {
    const Panel q = form_q(reflectors, m);
    Panel full{n, m, std::vector<double>(n * m, 0.0)};
    for (std::size_t k = 0; k < n; ++k) {
      double* dst = full.col(k);
      const double* coeff = u.col(k);
      for (std::size_t i = 0; i < n; ++i) {
        const double s = coeff[i];
        if (s == 0.0) continue;
        const double* qi = q.col(i);
        for (std::size_t t = 0; t < m; ++t) dst[t] += s * qi[t];
      }
    }
    u = std::move(full);
  }

  out.u = Matrix(m, n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = u.col(k)[i];
  }
  out.vt = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double* src = v.col(order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vt(k, i) = src[i];
  }
  return out;
}

}  // namespace

std::size_t SvdResult::rank() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(sigma.begin(), sigma.end(), [](double s) { return s > 0.0; }));
}

SvdResult svd(const FeatureMatrix& f) {
  require_finite(f, "svd input");
  if (f.rows() >= f.cols()) return svd_tall(f, true);
  SvdResult t = svd_tall(f.transposed(), true);
  SvdResult out;
  out.sigma = std::move(t.sigma);
  out.u = t.vt.transposed();
  out.vt = t.u.transposed();
  return out;
}

std::vector<double> singular_values(const FeatureMatrix& f) {
  require_finite(f, "svd input");
  if (f.rows() >= f.cols()) return svd_tall(f, false).sigma;
  return svd_tall(f.transposed(), false).sigma;
}

}  // namespace nmtune
