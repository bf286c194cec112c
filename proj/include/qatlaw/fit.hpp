#pragma once

#include <span>
#include <utility>
#include <vector>

#include "qatlaw/laws.hpp"
#include "qatlaw/lbfgs.hpp"

namespace qatlaw::fit {

struct HuberConfig {
  double delta = 1e-3;  // transition point in log-loss units
  void validate() const {
    if (!(delta > 0.0)) throw ConfigError("huber delta must be > 0");
  }
};

// r^2/2 inside |r| <= delta, delta * (|r| - delta/2) outside.
double huber(double r, const HuberConfig& cfg);
double huber_grad(double r, const HuberConfig& cfg);

struct FitInfo {
  double objective = 0.0;
  bool converged = false;
  int n_starts_used = 0;
  double r_squared = 0.0;  // on the model's natural prediction scale
  double mse = 0.0;
};

struct ChinchillaFit {
  laws::ChinchillaParams params;
  FitInfo info;
};

struct DeltaFit {
  laws::DeltaParams params;
  FitInfo info;
};

// One unquantized training run used for the smooth-loss fit.
struct LossObservation {
  double n_params = 0.0;
  double d_tokens = 0.0;
  double loss = 0.0;
};

// One quantized-vs-unquantized loss gap used for the error-law fit.
struct DeltaObservation {
  double n_params = 0.0;
  double d_tokens = 0.0;
  double g_eff = 0.0;
  double delta = 0.0;
};

// Default multistart grids: exponents over {0.1, 0.3, 0.5, 0.7} and log
// coefficients over {-2, 0, 2, 4, 6}, cross product pruned to <= 500 starts.
std::vector<std::vector<double>> default_chinchilla_grid(bool constrain_alpha_eq_beta);
std::vector<std::vector<double>> default_delta_grid(bool freeze_gamma_d);

// Robust fit of A/N^alpha + B/D^beta + E on log losses. Optimizes
// (log A, log B, log E, alpha[, beta]) over Huber residuals with L-BFGS from
// every multistart point; the best objective wins (ties broken by
// lexicographically smaller parameters).
ChinchillaFit fit_chinchilla(std::span<const LossObservation> runs, const OptimConfig& cfg,
                             const HuberConfig& huber_cfg, bool constrain_alpha_eq_beta);

// Robust fit of k * D^gd * (log2 g)^gg / N^gn on log deltas; the model is
// linear in (log k, gd, gg, gn). freeze_gamma_d pins gamma_d at 0.
DeltaFit fit_delta(std::span<const DeltaObservation> observations, const OptimConfig& cfg,
                   const HuberConfig& huber_cfg, bool freeze_gamma_d = false);

// Closed-form least squares on the log-linear form (test oracle for the
// squared-loss limit of fit_delta).
laws::DeltaParams fit_delta_ols(std::span<const DeltaObservation> observations);

// (mse, r_squared) of predictions against actuals.
std::pair<double, double> fit_metrics(std::span<const double> predicted,
                                      std::span<const double> actual);

struct AblateDResult {
  double relative_error_with_d = 0.0;
  double relative_error_without_d = 0.0;
  DeltaFit fit_with_d;
  DeltaFit fit_without_d;
};

// Fits the error law with and without the D term and reports the in-sample
// relative error of each.
AblateDResult ablate_d(std::span<const DeltaObservation> observations,
                       const OptimConfig& cfg, const HuberConfig& huber_cfg);

}  // namespace qatlaw::fit
