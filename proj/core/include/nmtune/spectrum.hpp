#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nmtune/matrix.hpp"

namespace nmtune {

/// Spectrum diagnostics of one feature matrix. Entropies are in nats.
struct SpectrumReport {
  double sve = 0.0;
  double lsvr = 0.0;
  std::vector<double> sigma_top;
  double total_sigma = 0.0;
  std::size_t m = 0;
  std::size_t d = 0;
  std::size_t rank = 0;
  bool centered = false;
  std::string dataset_id;
  std::string model_id;
};

struct AnalyzeOptions {
  std::size_t top_k = 20;
  bool center = false;  ///< subtract the column mean before the SVD
};

/// Singular value entropy: -sum p_i ln p_i with p_i = sigma_i / sum sigma.
/// Throws ZeroSpectrum if every value is zero.
double sve(std::span<const double> sigma);

/// Largest singular value ratio: -ln(sigma_1 / sum sigma).
double lsvr(std::span<const double> sigma);

SpectrumReport analyze(const FeatureMatrix& f, std::string dataset_id, std::string model_id,
                       const AnalyzeOptions& options = {});

}  // namespace nmtune
