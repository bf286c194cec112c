#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qatlaw/matrix.hpp"
#include "qatlaw/quant.hpp"

namespace qatlaw::stats {

// Pearson (non-excess) kurtosis m4 / m2^2 of the sample. Requires n >= 4 and
// positive sample variance; >= 1 for any non-degenerate sample, 3 for a
// Gaussian.
double kurtosis(std::span<const double> values);

struct ErrorMetrics {
  double mse = 0.0;
  double max_abs = 0.0;
  double relative_l2 = 0.0;  // ||a-b|| / ||a||; 0 when both are zero
};

ErrorMetrics error_metrics(const Matrix& reference, const Matrix& approx);

// Metrics between x and fake_quantize(x, config).
ErrorMetrics quant_error_metrics(const Matrix& x, const quant::QuantConfig& config);

struct KurtosisReport {
  std::vector<std::pair<std::string, double>> layers;
  std::string to_csv() const;  // "layer,kurtosis" rows
  double at(const std::string& layer) const;
};

}  // namespace qatlaw::stats
