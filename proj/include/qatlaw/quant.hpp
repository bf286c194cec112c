#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qatlaw/errors.hpp"
#include "qatlaw/matrix.hpp"

namespace qatlaw::quant {

// ---------------------------------------------------------------------------
// Numeric formats
// ---------------------------------------------------------------------------

enum class FormatKind { IntSym, FpE2M1 };

// Symmetric integer (4/8 bit, 16 = identity passthrough) or E2M1 4-bit float.
struct NumericFormat {
  FormatKind kind = FormatKind::IntSym;
  int bits = 4;

  static NumericFormat int4() { return {FormatKind::IntSym, 4}; }
  static NumericFormat int8() { return {FormatKind::IntSym, 8}; }
  static NumericFormat bf16() { return {FormatKind::IntSym, 16}; }
  static NumericFormat fp4_e2m1() { return {FormatKind::FpE2M1, 4}; }

  bool is_passthrough() const { return kind == FormatKind::IntSym && bits == 16; }

  // Largest code magnitude the absmax scale maps the group maximum onto:
  // 2^(b-1) for symmetric integers, 6 for E2M1.
  double max_code_magnitude() const;
  double qmin() const;  // IntSym: -2^(b-1);  FpE2M1: -6
  double qmax() const;  // IntSym: 2^(b-1)-1; FpE2M1: +6

  std::string name() const;
  static NumericFormat parse(const std::string& name);
  bool operator==(const NumericFormat&) const = default;
};

// The 8 representable E2M1 magnitudes (15 distinct signed values with +-0
// collapsed).
inline constexpr std::array<double, 8> kFp4Magnitudes{0.0, 0.5, 1.0, 1.5,
                                                      2.0, 3.0, 4.0, 6.0};

// Nearest representable E2M1 value; ties go toward zero, |v| > 6 clamps.
double fp4_nearest(double v);

// Round to nearest integer, ties to even. Deterministic regardless of the
// floating environment.
double round_half_even(double v);

// ---------------------------------------------------------------------------
// Granularity and group partitioning
// ---------------------------------------------------------------------------

enum class GranularityKind { Group, PerVector, PerTensor };

struct Granularity {
  GranularityKind kind = GranularityKind::PerTensor;
  int group_size = 0;  // meaningful for kind == Group only

  static Granularity group(int g);
  static Granularity per_vector() { return {GranularityKind::PerVector, 0}; }
  static Granularity per_tensor() { return {GranularityKind::PerTensor, 0}; }

  std::string name() const;  // "g32", "per_vector", "per_tensor"
  static Granularity parse(const std::string& name);
  bool operator==(const Granularity&) const = default;
};

// Maps each element of a rows x cols matrix to a dense group id. Groups are
// contiguous runs along rows; PerVector is one group per row; PerTensor is a
// single group.
struct GroupMap {
  int rows = 0;
  int cols = 0;
  GranularityKind kind = GranularityKind::PerTensor;
  int group_size = 0;      // elements sharing one scale
  int groups_per_row = 1;  // 1 for PerVector / PerTensor
  int num_groups = 1;

  int group_of(int r, int c) const {
    switch (kind) {
      case GranularityKind::Group:
        return r * groups_per_row + c / group_size;
      case GranularityKind::PerVector:
        return r;
      case GranularityKind::PerTensor:
        return 0;
    }
    return 0;
  }
};

GroupMap partition_groups(int rows, int cols, const Granularity& granularity);

// ---------------------------------------------------------------------------
// Quantizers and configuration
// ---------------------------------------------------------------------------

// AbsMax: s = max|X| / M.
// Lsq:    s is a learned parameter (one per group).
// Lwc:    s = max|X| * gamma / M, gamma learned per weight group.
// Lac:    s = max|X| * gamma / M, gamma learned per group index within the
//         hidden dimension and shared across tokens (rows).
enum class QuantizerKind { AbsMax, Lsq, Lwc, Lac };

std::string to_string(QuantizerKind);
QuantizerKind parse_quantizer(const std::string& name);

// Learned quantizer parameters. For Lsq/Lwc the vector has one entry per
// group id; for Lac one entry per group index within a row.
struct QuantizerState {
  QuantizerKind kind = QuantizerKind::AbsMax;
  std::vector<double> values;
};

struct QuantConfig {
  NumericFormat format;
  Granularity granularity;
  QuantizerKind quantizer = QuantizerKind::AbsMax;

  static QuantConfig passthrough() {
    return {NumericFormat::bf16(), Granularity::per_tensor(), QuantizerKind::AbsMax};
  }
  bool is_passthrough() const { return format.is_passthrough(); }
  bool operator==(const QuantConfig&) const = default;

  std::string to_json_string() const;
  static QuantConfig from_json_string(const std::string& text);
};

// ---------------------------------------------------------------------------
// Per-layer plans
// ---------------------------------------------------------------------------

enum class LayerKind { Qkv, O, Fc1, Fc2 };
enum class TensorRole { Weight, ActivationInput };

inline constexpr std::array<LayerKind, 4> kAllLayers{LayerKind::Qkv, LayerKind::O,
                                                     LayerKind::Fc1, LayerKind::Fc2};
std::string to_string(LayerKind);
std::string to_string(TensorRole);

// Exactly one QuantConfig per (layer kind, tensor role).
struct QuantPlan {
  std::array<std::array<QuantConfig, 2>, 4> entries{};

  QuantPlan();  // all passthrough

  QuantConfig& at(LayerKind l, TensorRole r) {
    return entries[static_cast<int>(l)][static_cast<int>(r)];
  }
  const QuantConfig& at(LayerKind l, TensorRole r) const {
    return entries[static_cast<int>(l)][static_cast<int>(r)];
  }

  bool is_passthrough() const;

  static QuantPlan bf16() { return QuantPlan(); }
  // Same weight / activation config for all four layers.
  static QuantPlan uniform(const QuantConfig& weight, const QuantConfig& activation);

  std::string to_json_string() const;
  static QuantPlan from_json_string(const std::string& text);

  // Mnemonic names: "bf16", "w4a4_g32", "w4a16_g128", "w16a4_pv",
  // "w4a4_pt", and an optional "_fc2_8bit" suffix that lifts the FC2
  // activation input to int8.
  static QuantPlan from_name(const std::string& name);
};

// ---------------------------------------------------------------------------
// Quantize / dequantize
// ---------------------------------------------------------------------------

struct QuantizedTensor {
  // IntSym: integer codes in [qmin, qmax]. FpE2M1: signed values from the
  // E2M1 set. Stored as doubles; dequantize is codes * group scale.
  Matrix codes;
  std::vector<double> scales;  // one per group id, all > 0
  QuantConfig config;
  GroupMap groups;
};

// s = max|group| / M; all-zero groups get s = 1. Throws InvalidValue on
// non-finite input.
double absmax_scale(std::span<const double> group_values, const NumericFormat& format);

// Per-group scales as quantize would compute them (absmax or learned).
std::vector<double> compute_scales(const Matrix& x, const QuantConfig& config,
                                   const GroupMap& groups,
                                   const QuantizerState* state = nullptr);

QuantizedTensor quantize(const Matrix& x, const QuantConfig& config,
                         const QuantizerState* state = nullptr);
Matrix dequantize(const QuantizedTensor& q);
Matrix fake_quantize(const Matrix& x, const QuantConfig& config,
                     const QuantizerState* state = nullptr);

// Straight-through gradient: passes `upstream` where x/s lies strictly
// inside the representable range, zero where clipped.
Matrix ste_grad(const Matrix& upstream, const Matrix& x, const QuantConfig& config,
                const QuantizerState* state = nullptr);

// Learned-step-size gradient of the dequantized output w.r.t. a shared scale
// s: per element (round(x/s) - x/s) in range, qmin/qmax when clipped low/high,
// weighted by `upstream` and summed.
double lsq_scale_grad(const Matrix& upstream, const Matrix& x, double s,
                      const NumericFormat& format = NumericFormat::int4());

}  // namespace qatlaw::quant
