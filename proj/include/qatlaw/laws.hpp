#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qatlaw/errors.hpp"
#include "qatlaw/quant.hpp"

namespace qatlaw::laws {

// Constants of the smooth loss law L(N, D) = A / N^alpha + B / D^beta + E.
// N and D are raw counts (parameters, tokens), not billions.
struct ChinchillaParams {
  double E = 0.0;
  double A = 0.0;
  double alpha = 0.0;
  double B = 0.0;
  double beta = 0.0;
  bool operator==(const ChinchillaParams&) const = default;
};

// Constants of the QAT error law
//   delta(N, D, G) = k * D^gamma_d * (log2 G)^gamma_g / N^gamma_n.
struct DeltaParams {
  double k = 0.0;
  double gamma_n = 0.0;
  double gamma_d = 0.0;
  double gamma_g = 0.0;
  bool operator==(const DeltaParams&) const = default;
};

enum class PrecisionTag { W4A4, W4A16, W16A4, W4A4Fc2_8, W16A4Fc2_8 };

std::string to_string(PrecisionTag);
PrecisionTag parse_precision(const std::string& name);  // "w4a4", "w16a4_fc2_8", ...
inline constexpr std::array<PrecisionTag, 5> kAllPrecisions{
    PrecisionTag::W4A4, PrecisionTag::W4A16, PrecisionTag::W16A4,
    PrecisionTag::W4A4Fc2_8, PrecisionTag::W16A4Fc2_8};

// Elements sharing one scale: Group(g) -> g, PerVector -> the quantized
// vector length. PerTensor is rejected (the error law excludes it).
double effective_g(const quant::Granularity& granularity, int vector_length);

double chinchilla_loss(const ChinchillaParams& p, double n_params, double d_tokens);

// g == 1 means no quantization and returns 0; 1 < g < 2 (and g <= 0) are
// rejected.
double delta(const DeltaParams& p, double n_params, double d_tokens, double g);

double qat_loss(const ChinchillaParams& c, const DeltaParams& d, double n_params,
                double d_tokens, double g);

// Error implied by an effective-parameter-multiplier law:
// A / (N * epm)^alpha - A / N^alpha. Requires epm in (0, 1].
double legacy_delta(const ChinchillaParams& c, double epm, double n_params);

// Effective parameter multiplier solving
// chinchilla_loss(epm * N, D) = qat_loss(N, D, g).
double epm(const ChinchillaParams& c, const DeltaParams& d, double n_params,
           double d_tokens, double g);

// One constant-error line in (log10 N, log10 D) space: y = slope * x + intercept.
struct ContourLine {
  double level = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double x0 = 0.0, y0 = 0.0;  // endpoints at the N-range boundaries
  double x1 = 0.0, y1 = 0.0;
};

std::vector<ContourLine> contour_lines(const DeltaParams& d, double g,
                                       std::span<const double> levels,
                                       std::pair<double, double> n_range,
                                       std::pair<double, double> d_range);

// Least-squares slope through the origin for pairs
// (observed combined error, sum of the two single-source errors).
double fit_sum_coefficient(std::span<const std::pair<double, double>> pairs);

double ratio_r(const DeltaParams& d_w16a4, const DeltaParams& d_w4a16,
               double n_params, double d_tokens, double g);

// Mean of |predicted - actual| / actual. Requires actual > 0 elementwise.
double relative_error(std::span<const double> predicted, std::span<const double> actual);

// ---------------------------------------------------------------------------
// Parameter files
// ---------------------------------------------------------------------------

// JSON layout: {"chinchilla": {...}, "delta": {"w4a4": {...}, ...}}.
struct ParamsFile {
  ChinchillaParams chinchilla;
  std::map<std::string, DeltaParams> delta;

  const DeltaParams& delta_for(const std::string& key) const;
};

ParamsFile parse_params_json(const std::string& text);
std::string params_to_json(const ParamsFile& p);
ParamsFile load_params_file(const std::string& path);
void save_params_file(const std::string& path, const ParamsFile& p);

}  // namespace qatlaw::laws
