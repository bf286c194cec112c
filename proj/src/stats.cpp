#include "qatlaw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qatlaw::stats {

double kurtosis(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 4) throw InsufficientData("kurtosis requires at least 4 samples");
  double mean = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidValue("kurtosis: non-finite sample");
    mean += v;
  }
  mean /= static_cast<double>(n);
  // Two-pass central moments around the sample mean.
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 <= 0.0) throw DegenerateSample("kurtosis undefined for zero-variance sample");
  return m4 / (m2 * m2);
}

ErrorMetrics error_metrics(const Matrix& reference, const Matrix& approx) {
  if (!reference.same_shape(approx))
    throw InvalidValue("error_metrics: shape mismatch");
  if (reference.size() == 0) throw InvalidValue("error_metrics: empty matrices");
  ErrorMetrics m;
  double sq = 0.0, ref_sq = 0.0;
  for (std::size_t i = 0; i < reference.data.size(); ++i) {
    const double d = reference.data[i] - approx.data[i];
    sq += d * d;
    ref_sq += reference.data[i] * reference.data[i];
    m.max_abs = std::max(m.max_abs, std::fabs(d));
  }
  m.mse = sq / static_cast<double>(reference.size());
  m.relative_l2 = ref_sq > 0.0 ? std::sqrt(sq / ref_sq) : (sq > 0.0 ? std::sqrt(sq) : 0.0);
  return m;
}

ErrorMetrics quant_error_metrics(const Matrix& x, const quant::QuantConfig& config) {
  return error_metrics(x, quant::fake_quantize(x, config));
}

std::string KurtosisReport::to_csv() const {
  std::ostringstream os;
  os << "layer,kurtosis\n";
  for (const auto& [layer, k] : layers) os << layer << "," << k << "\n";
  return os.str();
}

double KurtosisReport::at(const std::string& layer) const {
  for (const auto& [name, k] : layers)
    if (name == layer) return k;
  throw InvalidValue("no kurtosis entry for layer '" + layer + "'");
}

}  // namespace qatlaw::stats
