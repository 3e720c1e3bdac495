#include "nmtune/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "nmtune/error.hpp"
#include "nmtune/svd.hpp"

namespace nmtune {

namespace {

double spectrum_total(std::span<const double> sigma) {
  double total = 0.0;
  for (double s : sigma) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      fail(ErrorKind::kInvalidInput, "singular values must be finite and non-negative");
    }
    total += s;
  }
  if (total <= 0.0) fail(ErrorKind::kZeroSpectrum, "spectrum is all zeros");
  return total;
}

}  // namespace

double sve(std::span<const double> sigma) {
  const double total = spectrum_total(sigma);
  double h = 0.0;
  for (double s : sigma) {
    if (s == 0.0) continue;
    const double p = s / total;
    h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

double lsvr(std::span<const double> sigma) {
  const double total = spectrum_total(sigma);
  const double top = *std::max_element(sigma.begin(), sigma.end());
  return std::max(-std::log(top / total), 0.0);
}

SpectrumReport analyze(const FeatureMatrix& f, std::string dataset_id, std::string model_id,
                       const AnalyzeOptions& options) {
  require_finite(f, "features");
  const std::vector<double> sigma = options.center ? singular_values(centered(f))
                                                   : singular_values(f);
  SpectrumReport report;
  report.sve = sve(sigma);
  report.lsvr = lsvr(sigma);
  report.sigma_top.assign(sigma.begin(),
                          sigma.begin() + static_cast<std::ptrdiff_t>(
                                              std::min(options.top_k, sigma.size())));
  for (double s : sigma) {
    report.total_sigma += s;
    if (s > 0.0) ++report.rank;
  }
  report.m = f.rows();
  report.d = f.cols();
  report.centered = options.center;
  report.dataset_id = std::move(dataset_id);
  report.model_id = std::move(model_id);
  return report;
}

}  // namespace nmtune
