#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qatlaw/matrix.hpp"
#include "qatlaw/quant.hpp"
#include "qatlaw/stats.hpp"

namespace qatlaw::toy {

// ---------------------------------------------------------------------------
// Configs
// ---------------------------------------------------------------------------

struct ToyModelConfig {
  int layers = 2;
  int hidden = 64;
  int ffn_hidden = 128;
  int heads = 4;
  int kv_heads = 2;
  int vocab = 256;
  int seq_len = 64;

  int head_dim() const { return hidden / heads; }
  int kv_dim() const { return kv_heads * head_dim(); }
  void validate() const;

  std::string to_json_string() const;
  static ToyModelConfig from_json_string(const std::string& text);
};

struct TrainConfig {
  double max_lr = 3e-3;
  double min_lr = 3e-4;  // cosine floor, conventionally 0.1 * max_lr
  int warmup_steps = 20;
  int steps = 200;
  int batch = 4;
  double weight_decay = 0.1;
  double grad_clip_norm = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;
  double adam_eps = 1e-8;
  double ema_decay = 0.99;
  std::uint64_t seed = 1234;

  void validate() const;
  std::string to_json_string() const;
  static TrainConfig from_json_string(const std::string& text);
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct BlockParams {
  std::vector<double> rms1_gain, rms2_gain;
  Matrix w_qkv;  // [hidden + 2*kv_dim, hidden]
  Matrix w_o;    // [hidden, hidden]
  Matrix w_fc1;  // [2*ffn_hidden, hidden], gate rows then up rows
  Matrix w_fc2;  // [hidden, ffn_hidden]
};

struct ToyModel {
  ToyModelConfig cfg;
  Matrix tok_emb;  // [vocab, hidden]
  Matrix pos_emb;  // [seq_len, hidden]
  std::vector<BlockParams> blocks;
  std::vector<double> final_gain;
  Matrix w_head;  // [vocab, hidden]

  // Learned quantizer parameters, keyed "block<i>.<layer>.<role>"; present
  // only for sites whose plan uses a learned quantizer.
  std::map<std::string, quant::QuantizerState> quant_states;

  std::int64_t parameter_count() const;  // excludes quantizer states
};

// Mutable view of one parameter tensor, used by the optimizer and tests.
struct ParamRef {
  std::string name;
  std::vector<double>* values = nullptr;
  bool decay = false;
  enum class Clamp { None, Gamma, PositiveScale } clamp = Clamp::None;
};

std::vector<ParamRef> collect_params(ToyModel& model);

ToyModel build_model(const ToyModelConfig& cfg, std::uint64_t seed);

// Creates quant_states entries required by the plan (gamma = 1 for
// Lwc/Lac, absmax scales for Lsq weights) and validates plan/model
// compatibility.
void prepare_quant_states(ToyModel& model, const quant::QuantPlan& plan);
void validate_plan(const ToyModelConfig& cfg, const quant::QuantPlan& plan);

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

// batch sequences of seq+1 consecutive tokens; positions 0..seq-1 are inputs
// and 1..seq are next-token targets.
struct TokenBatch {
  int batch = 0;
  int seq = 0;
  std::vector<std::int32_t> tokens;  // batch * (seq + 1)
};

// Flattened pre-quantization inputs of each linear layer kind, pooled over
// blocks and tokens.
struct ActivationTaps {
  std::vector<double> qkv, o, fc1, fc2;
};

double forward_loss(const ToyModel& model, const TokenBatch& batch,
                    const quant::QuantPlan& plan, ActivationTaps* taps = nullptr);

struct Gradients {
  double loss = 0.0;
  std::vector<std::string> names;             // collect_params order
  std::vector<std::vector<double>> values;

  const std::vector<double>& at(const std::string& name) const;
};

Gradients backward(const ToyModel& model, const TokenBatch& batch,
                   const quant::QuantPlan& plan);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct LossCurve {
  std::vector<double> raw;       // per-step training loss, nats
  std::vector<double> smoothed;  // exponential moving average
  double ema_decay = 0.99;

  double final_smoothed() const;
  std::string to_csv() const;  // "step,raw_loss,smoothed_loss"
};

// AdamW with linear warmup and cosine decay; deterministic for a fixed
// (model seed, config, plan). Data order depends only on the step index.
LossCurve train(ToyModel& model, std::span<const std::int32_t> corpus,
                const TrainConfig& tc, const quant::QuantPlan& plan);

stats::KurtosisReport measure_layer_kurtosis(const ToyModel& model,
                                             const TokenBatch& batch,
                                             const quant::QuantPlan& plan);

struct ProbeRun {
  std::string name;
  quant::QuantPlan plan;
};

struct ProbeResult {
  std::string name;
  double final_smoothed = 0.0;
  double delta_toy = 0.0;  // final smoothed loss minus the unquantized baseline's
  LossCurve curve;
};

// Trains one model per plan with identical seeds and data order. The list
// must contain an unquantized (passthrough) baseline.
std::vector<ProbeResult> delta_probe(const ToyModelConfig& cfg, const TrainConfig& tc,
                                     std::span<const std::int32_t> corpus,
                                     const std::vector<ProbeRun>& plans);

// Deterministic Zipf(1.1) token stream with planted order-2 copy structure;
// the stationary unigram distribution stays Zipf.
std::vector<std::int32_t> synthetic_corpus(std::uint64_t seed, int vocab,
                                           std::int64_t length);

// Slices batch windows out of the corpus for a given step, wrapping around.
TokenBatch batch_for_step(std::span<const std::int32_t> corpus, int step, int batch,
                          int seq);

}  // namespace qatlaw::toy
