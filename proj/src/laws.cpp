#include "qatlaw/laws.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace qatlaw::laws {

using nlohmann::json;

std::string to_string(PrecisionTag t) {
  switch (t) {
    case PrecisionTag::W4A4: return "w4a4";
    case PrecisionTag::W4A16: return "w4a16";
    case PrecisionTag::W16A4: return "w16a4";
    case PrecisionTag::W4A4Fc2_8: return "w4a4_fc2_8";
    case PrecisionTag::W16A4Fc2_8: return "w16a4_fc2_8";
  }
  return "";
}

PrecisionTag parse_precision(const std::string& name) {
  for (PrecisionTag t : kAllPrecisions)
    if (to_string(t) == name) return t;
  throw SchemaError("unknown precision tag: '" + name + "'");
}

double effective_g(const quant::Granularity& granularity, int vector_length) {
  switch (granularity.kind) {
    case quant::GranularityKind::Group:
      return static_cast<double>(granularity.group_size);
    case quant::GranularityKind::PerVector:
      if (vector_length < 2)
        throw DomainError("per-vector effective G needs vector length >= 2");
      return static_cast<double>(vector_length);
    case quant::GranularityKind::PerTensor:
      throw DomainError("per-tensor granularity has no effective G in the error law");
  }
  throw DomainError("invalid granularity");
}

double chinchilla_loss(const ChinchillaParams& p, double n_params, double d_tokens) {
  if (!(n_params > 0.0) || !(d_tokens > 0.0))
    throw DomainError("chinchilla_loss requires N > 0 and D > 0");
  return p.A / std::pow(n_params, p.alpha) + p.B / std::pow(d_tokens, p.beta) + p.E;
}

double delta(const DeltaParams& p, double n_params, double d_tokens, double g) {
  if (!(n_params > 0.0) || !(d_tokens > 0.0))
    throw DomainError("delta requires N > 0 and D > 0");
  if (g == 1.0) return 0.0;  // no quantization
  if (!(g >= 2.0)) throw DomainError("delta requires g >= 2 (or exactly 1)");
  return p.k * std::pow(d_tokens, p.gamma_d) * std::pow(std::log2(g), p.gamma_g) /
         std::pow(n_params, p.gamma_n);
}

double qat_loss(const ChinchillaParams& c, const DeltaParams& d, double n_params,
                double d_tokens, double g) {
  return chinchilla_loss(c, n_params, d_tokens) + delta(d, n_params, d_tokens, g);
}

double legacy_delta(const ChinchillaParams& c, double epm, double n_params) {
  if (!(epm > 0.0)) throw DomainError("legacy_delta requires epm > 0");
  if (!(n_params > 0.0)) throw DomainError("legacy_delta requires N > 0");
  const double base = c.A / std::pow(n_params, c.alpha);
  return c.A / std::pow(n_params * epm, c.alpha) - base;
}

double epm(const ChinchillaParams& c, const DeltaParams& d, double n_params,
           double d_tokens, double g) {
  if (!(c.A > 0.0) || !(c.alpha > 0.0))
    throw DomainError("epm requires A > 0 and alpha > 0");
  const double dl = delta(d, n_params, d_tokens, g);
  return std::pow(c.A / (c.A + dl * std::pow(n_params, c.alpha)), 1.0 / c.alpha);
}

std::vector<ContourLine> contour_lines(const DeltaParams& d, double g,
                                       std::span<const double> levels,
                                       std::pair<double, double> n_range,
                                       std::pair<double, double> d_range) {
  if (!(g >= 2.0)) throw DomainError("contour_lines requires g >= 2");
  if (!(d.gamma_d > 0.0)) throw DomainError("contour_lines requires gamma_d > 0");
  if (!(n_range.first > 0.0) || !(n_range.second > n_range.first))
    throw DomainError("contour_lines: invalid N range");
  if (!(d_range.first > 0.0) || !(d_range.second > d_range.first))
    throw DomainError("contour_lines: invalid D range");
  const double slope = d.gamma_n / d.gamma_d;
  // With G fixed, delta = C * D^gamma_d / N^gamma_n and
  // log10 C + gamma_d * y - gamma_n * x = log10 z0.
  const double log10_c = std::log10(d.k) + d.gamma_g * std::log10(std::log2(g));
  std::vector<ContourLine> out;
  out.reserve(levels.size());
  for (double z0 : levels) {
    if (!(z0 > 0.0)) throw DomainError("contour level must be > 0");
    ContourLine line;
    line.level = z0;
    line.slope = slope;
    line.intercept = (std::log10(z0) - log10_c) / d.gamma_d;
    line.x0 = std::log10(n_range.first);
    line.x1 = std::log10(n_range.second);
    line.y0 = slope * line.x0 + line.intercept;
    line.y1 = slope * line.x1 + line.intercept;
    out.push_back(line);
  }
  return out;
}

double fit_sum_coefficient(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 2)
    throw DegenerateInput("fit_sum_coefficient requires at least 2 pairs");
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [combined, sum] : pairs) {
    sxy += sum * combined;
    sxx += sum * sum;
  }
  if (sxx == 0.0) throw DegenerateInput("fit_sum_coefficient: all sums are zero");
  return sxy / sxx;
}

double ratio_r(const DeltaParams& d_w16a4, const DeltaParams& d_w4a16,
               double n_params, double d_tokens, double g) {
  const double denom = delta(d_w4a16, n_params, d_tokens, g);
  if (!(denom > 0.0)) throw DomainError("ratio_r: denominator error is not positive");
  return delta(d_w16a4, n_params, d_tokens, g) / denom;
}

double relative_error(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size())
    throw DomainError("relative_error: length mismatch");
  if (actual.empty()) throw DomainError("relative_error: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!(actual[i] > 0.0))
      throw DomainError("relative_error: actual values must be > 0");
    acc += std::fabs(predicted[i] - actual[i]) / actual[i];
  }
  return acc / static_cast<double>(actual.size());
}

// ---------------------------------------------------------------------------
// Parameter files
// ---------------------------------------------------------------------------

const DeltaParams& ParamsFile::delta_for(const std::string& key) const {
  auto it = delta.find(key);
  if (it == delta.end())
    throw ValidationError("parameter file has no delta entry '" + key + "'");
  return it->second;
}

namespace {

double require_number(const json& j, const std::string& key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw SchemaError("parameter file missing numeric field '" + key + "'");
  return j.at(key).get<double>();
}

DeltaParams delta_from_json(const json& j) {
  DeltaParams p;
  p.k = require_number(j, "k");
  p.gamma_n = require_number(j, "gamma_n");
  p.gamma_d = require_number(j, "gamma_d");
  p.gamma_g = require_number(j, "gamma_g");
  if (!(p.k > 0.0)) throw ValidationError("delta parameter k must be > 0");
  return p;
}

json delta_to_json(const DeltaParams& p) {
  return json{{"k", p.k},
              {"gamma_n", p.gamma_n},
              {"gamma_d", p.gamma_d},
              {"gamma_g", p.gamma_g}};
}

}  // namespace

ParamsFile parse_params_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid parameter JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("parameter file must be a JSON object");
  ParamsFile p;
  if (j.contains("chinchilla")) {
    const json& c = j.at("chinchilla");
    p.chinchilla.E = require_number(c, "E");
    p.chinchilla.A = require_number(c, "A");
    p.chinchilla.alpha = require_number(c, "alpha");
    p.chinchilla.B = require_number(c, "B");
    p.chinchilla.beta = require_number(c, "beta");
    if (!(p.chinchilla.A > 0.0) || !(p.chinchilla.B > 0.0) || !(p.chinchilla.E > 0.0))
      throw ValidationError("chinchilla parameters A, B, E must be > 0");
  }
  if (j.contains("delta")) {
    if (!j.at("delta").is_object())
      throw SchemaError("'delta' must be an object keyed by precision");
    for (const auto& [key, value] : j.at("delta").items())
      p.delta[key] = delta_from_json(value);
  }
  return p;
}

std::string params_to_json(const ParamsFile& p) {
  json j;
  j["chinchilla"] = {{"E", p.chinchilla.E}, {"A", p.chinchilla.A},
                     {"alpha", p.chinchilla.alpha}, {"B", p.chinchilla.B},
                     {"beta", p.chinchilla.beta}};
  json d = json::object();
  for (const auto& [key, value] : p.delta) d[key] = delta_to_json(value);
  j["delta"] = d;
  return j.dump(2);
}

ParamsFile load_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open parameter file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_params_json(buf.str());
}

void save_params_file(const std::string& path, const ParamsFile& p) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write parameter file: " + path);
  out << params_to_json(p) << "\n";
}

}  // namespace qatlaw::laws
