#include "qatlaw/quant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace qatlaw::quant {

using nlohmann::json;

double NumericFormat::max_code_magnitude() const {
  if (kind == FormatKind::FpE2M1) return 6.0;
  return std::ldexp(1.0, bits - 1);  // 2^(b-1)
}

double NumericFormat::qmin() const {
  if (kind == FormatKind::FpE2M1) return -6.0;
  return -std::ldexp(1.0, bits - 1);
}

double NumericFormat::qmax() const {
  if (kind == FormatKind::FpE2M1) return 6.0;
  return std::ldexp(1.0, bits - 1) - 1.0;
}

std::string NumericFormat::name() const {
  if (kind == FormatKind::FpE2M1) return "fp4_e2m1";
  switch (bits) {
    case 4: return "int4";
    case 8: return "int8";
    case 16: return "bf16";
  }
  return "int" + std::to_string(bits);
}

NumericFormat NumericFormat::parse(const std::string& name) {
  if (name == "int4") return int4();
  if (name == "int8") return int8();
  if (name == "bf16") return bf16();
  if (name == "fp4_e2m1") return fp4_e2m1();
  throw SchemaError("unknown numeric format: '" + name + "'");
}

double fp4_nearest(double v) {
  const double mag = std::fabs(v);
  if (mag >= kFp4Magnitudes.back()) return std::copysign(kFp4Magnitudes.back(), v);
  // Smallest magnitude wins ties, i.e. ties go toward zero.
  double best = kFp4Magnitudes[0];
  double best_d = mag;
  for (std::size_t i = 1; i < kFp4Magnitudes.size(); ++i) {
    const double d = std::fabs(mag - kFp4Magnitudes[i]);
    if (d < best_d) {
      best = kFp4Magnitudes[i];
      best_d = d;
    }
  }
  return v < 0.0 ? -best : best;
}

double round_half_even(double v) {
  const double f = std::floor(v);
  const double diff = v - f;
  if (diff > 0.5) return f + 1.0;
  if (diff < 0.5) return f;
  return std::fmod(f, 2.0) == 0.0 ? f : f + 1.0;
}

Granularity Granularity::group(int g) {
  if (g < 2) throw GranularityMismatch("group size must be >= 2, got " + std::to_string(g));
  return {GranularityKind::Group, g};
}

std::string Granularity::name() const {
  switch (kind) {
    case GranularityKind::Group: return "g" + std::to_string(group_size);
    case GranularityKind::PerVector: return "per_vector";
    case GranularityKind::PerTensor: return "per_tensor";
  }
  return "";
}

Granularity Granularity::parse(const std::string& name) {
  if (name == "per_vector") return per_vector();
  if (name == "per_tensor") return per_tensor();
  if (name.size() > 1 && name[0] == 'g') {
    int g = 0;
    for (std::size_t i = 1; i < name.size(); ++i) {
      if (name[i] < '0' || name[i] > '9')
        throw SchemaError("unknown granularity: '" + name + "'");
      g = g * 10 + (name[i] - '0');
    }
    return group(g);
  }
  throw SchemaError("unknown granularity: '" + name + "'");
}

GroupMap partition_groups(int rows, int cols, const Granularity& granularity) {
  if (rows <= 0 || cols <= 0)
    throw InvalidValue("partition_groups requires a nonempty matrix");
  GroupMap m;
  m.rows = rows;
  m.cols = cols;
  m.kind = granularity.kind;
  switch (granularity.kind) {
    case GranularityKind::Group: {
      const int g = granularity.group_size;
      if (g > cols)
        throw GranularityMismatch("group size " + std::to_string(g) +
                                  " exceeds row length " + std::to_string(cols));
      if (cols % g != 0)
        throw GranularityMismatch("group size " + std::to_string(g) +
                                  " does not divide row length " + std::to_string(cols));
      m.group_size = g;
      m.groups_per_row = cols / g;
      m.num_groups = rows * m.groups_per_row;
      break;
    }
    case GranularityKind::PerVector:
      m.group_size = cols;
      m.groups_per_row = 1;
      m.num_groups = rows;
      break;
    case GranularityKind::PerTensor:
      m.group_size = rows * cols;
      m.groups_per_row = 1;
      m.num_groups = 1;
      break;
  }
  return m;
}

std::string to_string(QuantizerKind k) {
  switch (k) {
    case QuantizerKind::AbsMax: return "absmax";
    case QuantizerKind::Lsq: return "lsq";
    case QuantizerKind::Lwc: return "lwc";
    case QuantizerKind::Lac: return "lac";
  }
  return "";
}

QuantizerKind parse_quantizer(const std::string& name) {
  if (name == "absmax") return QuantizerKind::AbsMax;
  if (name == "lsq") return QuantizerKind::Lsq;
  if (name == "lwc") return QuantizerKind::Lwc;
  if (name == "lac") return QuantizerKind::Lac;
  throw SchemaError("unknown quantizer: '" + name + "'");
}

std::string to_string(LayerKind l) {
  switch (l) {
    case LayerKind::Qkv: return "qkv";
    case LayerKind::O: return "o";
    case LayerKind::Fc1: return "fc1";
    case LayerKind::Fc2: return "fc2";
  }
  return "";
}

std::string to_string(TensorRole r) {
  return r == TensorRole::Weight ? "weight" : "activation_input";
}

namespace {

json config_to_json(const QuantConfig& c) {
  return json{{"format", c.format.name()},
              {"granularity", c.granularity.name()},
              {"quantizer", to_string(c.quantizer)}};
}

QuantConfig config_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("quant config must be a JSON object");
  QuantConfig c;
  c.format = NumericFormat::parse(j.at("format").get<std::string>());
  c.granularity = Granularity::parse(j.at("granularity").get<std::string>());
  if (j.contains("quantizer"))
    c.quantizer = parse_quantizer(j.at("quantizer").get<std::string>());
  return c;
}

LayerKind layer_from_string(const std::string& s) {
  for (LayerKind l : kAllLayers)
    if (to_string(l) == s) return l;
  throw SchemaError("unknown layer kind: '" + s + "'");
}

}  // namespace

std::string QuantConfig::to_json_string() const { return config_to_json(*this).dump(); }

QuantConfig QuantConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid quant config JSON: ") + e.what());
  }
  return config_from_json(j);
}

QuantPlan::QuantPlan() {
  for (auto& per_layer : entries)
    for (auto& cfg : per_layer) cfg = QuantConfig::passthrough();
}

bool QuantPlan::is_passthrough() const {
  for (const auto& per_layer : entries)
    for (const auto& cfg : per_layer)
      if (!cfg.is_passthrough()) return false;
  return true;
}

QuantPlan QuantPlan::uniform(const QuantConfig& weight, const QuantConfig& activation) {
  QuantPlan p;
  for (LayerKind l : kAllLayers) {
    p.at(l, TensorRole::Weight) = weight;
    p.at(l, TensorRole::ActivationInput) = activation;
  }
  return p;
}

std::string QuantPlan::to_json_string() const {
  json j = json::object();
  for (LayerKind l : kAllLayers) {
    j[to_string(l)] = {{"weight", config_to_json(at(l, TensorRole::Weight))},
                       {"activation_input", config_to_json(at(l, TensorRole::ActivationInput))}};
  }
  return j.dump(2);
}

QuantPlan QuantPlan::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid quant plan JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("quant plan must be a JSON object");
  QuantPlan p;
  for (LayerKind l : kAllLayers) {
    const std::string key = to_string(l);
    if (!j.contains(key))
      throw SchemaError("quant plan missing layer '" + key + "'");
    const json& lj = j.at(key);
    if (!lj.contains("weight") || !lj.contains("activation_input"))
      throw SchemaError("quant plan layer '" + key +
                        "' must define both 'weight' and 'activation_input'");
    p.at(l, TensorRole::Weight) = config_from_json(lj.at("weight"));
    p.at(l, TensorRole::ActivationInput) = config_from_json(lj.at("activation_input"));
  }
  for (const auto& [key, value] : j.items()) {
    (void)value;
    layer_from_string(key);  // reject unknown layers
  }
  return p;
}

QuantPlan QuantPlan::from_name(const std::string& name) {
  if (name == "bf16") return bf16();
  std::string base = name;
  bool fc2_8bit = false;
  const std::string suffix = "_fc2_8bit";
  if (base.size() > suffix.size() &&
      base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    fc2_8bit = true;
    base = base.substr(0, base.size() - suffix.size());
  }
  const auto us = base.find('_');
  if (us == std::string::npos)
    throw SchemaError("unknown plan name: '" + name + "'");
  const std::string prec = base.substr(0, us);
  const std::string gran = base.substr(us + 1);
  Granularity g;
  if (gran == "pv")
    g = Granularity::per_vector();
  else if (gran == "pt")
    g = Granularity::per_tensor();
  else
    g = Granularity::parse(gran);

  bool w4 = false, a4 = false;
  if (prec == "w4a4") {
    w4 = a4 = true;
  } else if (prec == "w4a16") {
    w4 = true;
  } else if (prec == "w16a4") {
    a4 = true;
  } else {
    throw SchemaError("unknown plan name: '" + name + "'");
  }
  const QuantConfig int4_cfg{NumericFormat::int4(), g, QuantizerKind::AbsMax};
  QuantPlan p = QuantPlan::uniform(w4 ? int4_cfg : QuantConfig::passthrough(),
                                   a4 ? int4_cfg : QuantConfig::passthrough());
  if (fc2_8bit)
    p.at(LayerKind::Fc2, TensorRole::ActivationInput) =
        QuantConfig{NumericFormat::int8(), g, QuantizerKind::AbsMax};
  return p;
}

double absmax_scale(std::span<const double> group_values, const NumericFormat& format) {
  if (group_values.empty()) throw InvalidValue("absmax_scale on empty group");
  double amax = 0.0;
  for (double v : group_values) {
    if (!std::isfinite(v)) throw InvalidValue("absmax_scale: non-finite input value");
    amax = std::max(amax, std::fabs(v));
  }
  if (amax == 0.0) return 1.0;  // all-zero group convention
  return amax / format.max_code_magnitude();
}

namespace {

void check_state(const QuantConfig& config, const GroupMap& groups,
                 const QuantizerState* state) {
  if (config.quantizer == QuantizerKind::AbsMax) return;
  if (state == nullptr) return;  // learned quantizers default to gamma=1 / absmax init
  const std::size_t expected =
      config.quantizer == QuantizerKind::Lac
          ? static_cast<std::size_t>(groups.groups_per_row)
          : static_cast<std::size_t>(groups.num_groups);
  if (state->values.size() != expected)
    throw ConfigError("quantizer state size " + std::to_string(state->values.size()) +
                      " does not match expected " + std::to_string(expected));
}

// Per-group absolute maxima (used by AbsMax, Lwc, Lac).
std::vector<double> group_absmax(const Matrix& x, const GroupMap& groups) {
  std::vector<double> amax(groups.num_groups, 0.0);
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < x.cols; ++c) {
      const double v = x.at(r, c);
      if (!std::isfinite(v)) throw InvalidValue("quantize: non-finite input value");
      double& a = amax[groups.group_of(r, c)];
      a = std::max(a, std::fabs(v));
    }
  }
  return amax;
}

}  // namespace

std::vector<double> compute_scales(const Matrix& x, const QuantConfig& config,
                                   const GroupMap& groups, const QuantizerState* state) {
  check_state(config, groups, state);
  const double m = config.format.max_code_magnitude();
  std::vector<double> scales(groups.num_groups, 1.0);
  switch (config.quantizer) {
    case QuantizerKind::AbsMax: {
      auto amax = group_absmax(x, groups);
      for (int g = 0; g < groups.num_groups; ++g)
        scales[g] = amax[g] == 0.0 ? 1.0 : amax[g] / m;
      break;
    }
    case QuantizerKind::Lwc:
    case QuantizerKind::Lac: {
      auto amax = group_absmax(x, groups);
      for (int g = 0; g < groups.num_groups; ++g) {
        double gamma = 1.0;
        if (state != nullptr) {
          const int idx = config.quantizer == QuantizerKind::Lac
                              ? g % groups.groups_per_row
                              : g;
          gamma = state->values[static_cast<std::size_t>(idx)];
        }
        if (!(gamma > 0.0) || gamma > 1.0)
          throw InvalidValue("clipping factor must lie in (0, 1]");
        scales[g] = amax[g] == 0.0 ? 1.0 : amax[g] * gamma / m;
      }
      break;
    }
    case QuantizerKind::Lsq: {
      if (state != nullptr) {
        for (int g = 0; g < groups.num_groups; ++g) {
          const double s = state->values[static_cast<std::size_t>(g)];
          if (!(s > 0.0)) throw InvalidValue("lsq scale must be > 0");
          scales[g] = s;
        }
      } else {
        // No learned scale yet: fall back to the absmax initialization.
        auto amax = group_absmax(x, groups);
        for (int g = 0; g < groups.num_groups; ++g)
          scales[g] = amax[g] == 0.0 ? 1.0 : amax[g] / m;
      }
      break;
    }
  }
  return scales;
}

QuantizedTensor quantize(const Matrix& x, const QuantConfig& config,
                         const QuantizerState* state) {
  if (config.quantizer == QuantizerKind::Lac &&
      config.granularity.kind == GranularityKind::PerTensor)
    throw ConfigError("lac requires grouping along the hidden dimension");
  if (config.is_passthrough()) {
    if (!x.all_finite()) throw InvalidValue("quantize: non-finite input value");
    QuantizedTensor q;
    q.codes = x;
    q.config = config;
    q.groups = partition_groups(x.rows, x.cols, Granularity::per_tensor());
    q.scales.assign(static_cast<std::size_t>(q.groups.num_groups), 1.0);
    return q;
  }

  QuantizedTensor q;
  q.config = config;
  q.groups = partition_groups(x.rows, x.cols, config.granularity);
  q.scales = compute_scales(x, config, q.groups, state);
  q.codes = Matrix(x.rows, x.cols);

  const bool is_int = config.format.kind == FormatKind::IntSym;
  const double qmin = config.format.qmin();
  const double qmax = config.format.qmax();
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < x.cols; ++c) {
      const double s = q.scales[static_cast<std::size_t>(q.groups.group_of(r, c))];
      const double v = x.at(r, c) / s;
      q.codes.at(r, c) = is_int ? std::clamp(round_half_even(v), qmin, qmax)
                                : fp4_nearest(v);
    }
  }
  return q;
}

Matrix dequantize(const QuantizedTensor& q) {
  Matrix out(q.codes.rows, q.codes.cols);
  for (int r = 0; r < q.codes.rows; ++r)
    for (int c = 0; c < q.codes.cols; ++c)
      out.at(r, c) =
          q.codes.at(r, c) * q.scales[static_cast<std::size_t>(q.groups.group_of(r, c))];
  return out;
}

Matrix fake_quantize(const Matrix& x, const QuantConfig& config,
                     const QuantizerState* state) {
  return dequantize(quantize(x, config, state));
}

Matrix ste_grad(const Matrix& upstream, const Matrix& x, const QuantConfig& config,
                const QuantizerState* state) {
  if (!upstream.same_shape(x)) throw InvalidValue("ste_grad: shape mismatch");
  if (config.is_passthrough()) return upstream;
  const GroupMap groups = partition_groups(x.rows, x.cols, config.granularity);
  const auto scales = compute_scales(x, config, groups, state);
  const double qmin = config.format.qmin();
  const double qmax = config.format.qmax();
  Matrix out(x.rows, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < x.cols; ++c) {
      const double v = x.at(r, c) / scales[static_cast<std::size_t>(groups.group_of(r, c))];
      out.at(r, c) = (v > qmin && v < qmax) ? upstream.at(r, c) : 0.0;
    }
  }
  return out;
}

double lsq_scale_grad(const Matrix& upstream, const Matrix& x, double s,
                      const NumericFormat& format) {
  if (!upstream.same_shape(x)) throw InvalidValue("lsq_scale_grad: shape mismatch");
  if (!(s > 0.0)) throw InvalidValue("lsq_scale_grad: scale must be > 0");
  const double qmin = format.qmin();
  const double qmax = format.qmax();
  const bool is_int = format.kind == FormatKind::IntSym;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double v = x.data[i] / s;
    const double code = is_int ? round_half_even(v) : fp4_nearest(v);
    double contrib;
    if (code < qmin || (!is_int && v < qmin))
      contrib = qmin;
    else if (code > qmax || (!is_int && v > qmax))
      contrib = qmax;
    else
      contrib = code - v;
    acc += upstream.data[i] * contrib;
  }
  return acc;
}

}  // namespace qatlaw::quant
