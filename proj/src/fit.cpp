#include "qatlaw/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <thread>

namespace qatlaw::fit {

double huber(double r, const HuberConfig& cfg) {
  cfg.validate();
  const double a = std::fabs(r);
  if (a <= cfg.delta) return 0.5 * r * r;
  return cfg.delta * (a - 0.5 * cfg.delta);
}

double huber_grad(double r, const HuberConfig& cfg) {
  cfg.validate();
  if (std::fabs(r) <= cfg.delta) return r;
  return r > 0.0 ? cfg.delta : -cfg.delta;
}

namespace {

int thread_cap() {
  if (const char* env = std::getenv("QSL_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs L-BFGS from every start and keeps the best result. Starts are
// independent; the merge is by minimum objective with ties broken by
// lexicographically smaller parameters, so the outcome does not depend on
// thread count.
MinimizeResult multistart_minimize(const Objective& objective,
                                   const std::vector<std::vector<double>>& starts,
                                   const OptimConfig& cfg) {
  if (starts.empty()) throw ConfigError("multistart grid is empty");
  std::vector<MinimizeResult> results(starts.size());
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      results[i] = lbfgs_minimize(objective, starts[i], cfg);
  };
  const int threads = std::min<int>(thread_cap(), static_cast<int>(starts.size()));
  if (threads <= 1) {
    run_range(0, starts.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (starts.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(starts.size(), b + chunk);
      if (b < e) pool.emplace_back(run_range, b, e);
    }
    for (auto& th : pool) th.join();
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].value < results[best].value ||
        (results[i].value == results[best].value && results[i].x < results[best].x))
      best = i;
  }
  return results[best];
}

constexpr double kExponentGrid[] = {0.1, 0.3, 0.5, 0.7};
constexpr double kLogCoeffGrid[] = {-2.0, 0.0, 2.0, 4.0, 6.0};
constexpr int kMaxStarts = 500;

std::vector<std::vector<double>> prune_to_max(std::vector<std::vector<double>> grid) {
  if (static_cast<int>(grid.size()) <= kMaxStarts) return grid;
  const std::size_t stride = (grid.size() + kMaxStarts - 1) / kMaxStarts;
  std::vector<std::vector<double>> kept;
  kept.reserve(kMaxStarts);
  for (std::size_t i = 0; i < grid.size(); i += stride) kept.push_back(std::move(grid[i]));
  return kept;
}

std::pair<double, double> metrics_impl(std::span<const double> predicted,
                                       std::span<const double> actual) {
  if (predicted.size() != actual.size() || actual.size() < 2)
    throw DegenerateInput("fit_metrics requires equal lengths >= 2");
  double mean = 0.0;
  for (double a : actual) mean += a;
  mean /= static_cast<double>(actual.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
  }
  if (ss_tot == 0.0) throw DegenerateInput("fit_metrics: zero variance in actual values");
  return {ss_res / static_cast<double>(actual.size()), 1.0 - ss_res / ss_tot};
}

}  // namespace

std::vector<std::vector<double>> default_chinchilla_grid(bool constrain_alpha_eq_beta) {
  std::vector<std::vector<double>> grid;
  for (double a : kLogCoeffGrid)
    for (double b : kLogCoeffGrid)
      for (double e : kLogCoeffGrid)
        for (double alpha : kExponentGrid) {
          if (constrain_alpha_eq_beta) {
            grid.push_back({a, b, e, alpha});
          } else {
            for (double beta : kExponentGrid) grid.push_back({a, b, e, alpha, beta});
          }
        }
  return prune_to_max(std::move(grid));
}

std::vector<std::vector<double>> default_delta_grid(bool freeze_gamma_d) {
  std::vector<std::vector<double>> grid;
  for (double logk : kLogCoeffGrid)
    for (double gn : kExponentGrid) {
      if (freeze_gamma_d) {
        for (double gg : kExponentGrid) grid.push_back({logk, gn, gg});
      } else {
        for (double gd : kExponentGrid)
          for (double gg : kExponentGrid) grid.push_back({logk, gn, gd, gg});
      }
    }
  return prune_to_max(std::move(grid));
}

ChinchillaFit fit_chinchilla(std::span<const LossObservation> runs, const OptimConfig& cfg,
                             const HuberConfig& huber_cfg, bool constrain_alpha_eq_beta) {
  cfg.validate();
  huber_cfg.validate();
  if (runs.size() < 6)
    throw InsufficientData("fit_chinchilla requires at least 6 runs");
  std::set<double> distinct_n, distinct_d;
  for (const auto& r : runs) {
    if (!(r.n_params > 0.0) || !(r.d_tokens > 0.0) || !(r.loss > 0.0))
      throw ValidationError("fit_chinchilla: N, D and loss must be > 0");
    distinct_n.insert(r.n_params);
    distinct_d.insert(r.d_tokens);
  }
  if (distinct_n.size() < 2 || distinct_d.size() < 2)
    throw DegenerateInput("fit_chinchilla needs at least 2 distinct N and 2 distinct D");

  struct Row {
    double ln_n, ln_d, ln_loss;
  };
  std::vector<Row> rows;
  rows.reserve(runs.size());
  for (const auto& r : runs)
    rows.push_back({std::log(r.n_params), std::log(r.d_tokens), std::log(r.loss)});

  const bool constrained = constrain_alpha_eq_beta;
  // Parameters: (a = log A, b = log B, e = log E, alpha [, beta]).
  Objective objective = [&rows, &huber_cfg, constrained](std::span<const double> p,
                                                         std::span<double> grad) {
    const double a = p[0], b = p[1], e = p[2], alpha = p[3];
    const double beta = constrained ? alpha : p[4];
    std::fill(grad.begin(), grad.end(), 0.0);
    double obj = 0.0;
    for (const Row& r : rows) {
      const double t1 = a - alpha * r.ln_n;
      const double t2 = b - beta * r.ln_d;
      const double t3 = e;
      const double tmax = std::max({t1, t2, t3});
      const double e1 = std::exp(t1 - tmax);
      const double e2 = std::exp(t2 - tmax);
      const double e3 = std::exp(t3 - tmax);
      const double sum = e1 + e2 + e3;
      const double log_pred = tmax + std::log(sum);
      const double resid = log_pred - r.ln_loss;
      obj += huber(resid, huber_cfg);
      const double w = huber_grad(resid, huber_cfg);
      const double w1 = w * e1 / sum;
      const double w2 = w * e2 / sum;
      const double w3 = w * e3 / sum;
      grad[0] += w1;
      grad[1] += w2;
      grad[2] += w3;
      if (constrained) {
        grad[3] += -w1 * r.ln_n - w2 * r.ln_d;
      } else {
        grad[3] += -w1 * r.ln_n;
        grad[4] += -w2 * r.ln_d;
      }
    }
    return obj;
  };

  const auto& starts =
      cfg.multistart_grid.empty() ? default_chinchilla_grid(constrained) : cfg.multistart_grid;
  const std::size_t want = constrained ? 4 : 5;
  for (const auto& s : starts)
    if (s.size() != want)
      throw ConfigError("multistart point has wrong dimension for this fit");

  const MinimizeResult res = multistart_minimize(objective, starts, cfg);

  ChinchillaFit out;
  out.params.A = std::exp(res.x[0]);
  out.params.B = std::exp(res.x[1]);
  out.params.E = std::exp(res.x[2]);
  out.params.alpha = res.x[3];
  out.params.beta = constrained ? res.x[3] : res.x[4];
  out.info.objective = res.value;
  out.info.converged = res.converged;
  out.info.n_starts_used = static_cast<int>(starts.size());
  std::vector<double> pred, act;
  pred.reserve(runs.size());
  act.reserve(runs.size());
  for (const auto& r : runs) {
    pred.push_back(laws::chinchilla_loss(out.params, r.n_params, r.d_tokens));
    act.push_back(r.loss);
  }
  std::tie(out.info.mse, out.info.r_squared) = metrics_impl(pred, act);
  return out;
}

namespace {

struct DeltaRow {
  double x_d, x_g, x_n, y;  // ln D, ln log2 g, ln N, ln delta
};

std::vector<DeltaRow> delta_rows(std::span<const DeltaObservation> observations) {
  if (observations.size() < 4)
    throw InsufficientData("fit_delta requires at least 4 observations");
  std::set<double> dn, dd, dg;
  std::vector<DeltaRow> rows;
  rows.reserve(observations.size());
  for (const auto& o : observations) {
    if (!(o.delta > 0.0))
      throw NonPositiveDelta("fit_delta: observed delta must be > 0");
    if (!(o.n_params > 0.0) || !(o.d_tokens > 0.0) || !(o.g_eff >= 2.0))
      throw ValidationError("fit_delta: N, D must be > 0 and g >= 2");
    dn.insert(o.n_params);
    dd.insert(o.d_tokens);
    dg.insert(o.g_eff);
    rows.push_back({std::log(o.d_tokens), std::log(std::log2(o.g_eff)),
                    std::log(o.n_params), std::log(o.delta)});
  }
  if (dn.size() < 2 || dd.size() < 2 || dg.size() < 2)
    throw InsufficientData("fit_delta needs variation in N, D and g");
  return rows;
}

}  // namespace

DeltaFit fit_delta(std::span<const DeltaObservation> observations, const OptimConfig& cfg,
                   const HuberConfig& huber_cfg, bool freeze_gamma_d) {
  cfg.validate();
  huber_cfg.validate();
  const auto rows = delta_rows(observations);

  // Parameters: (log k, gamma_n, gamma_d, gamma_g), gamma_d dropped when frozen.
  Objective objective = [&rows, &huber_cfg, freeze_gamma_d](std::span<const double> p,
                                                            std::span<double> grad) {
    const double logk = p[0], gn = p[1];
    const double gd = freeze_gamma_d ? 0.0 : p[2];
    const double gg = freeze_gamma_d ? p[2] : p[3];
    std::fill(grad.begin(), grad.end(), 0.0);
    double obj = 0.0;
    for (const DeltaRow& r : rows) {
      const double resid = logk + gd * r.x_d + gg * r.x_g - gn * r.x_n - r.y;
      obj += huber(resid, huber_cfg);
      const double w = huber_grad(resid, huber_cfg);
      grad[0] += w;
      grad[1] += -w * r.x_n;
      if (freeze_gamma_d) {
        grad[2] += w * r.x_g;
      } else {
        grad[2] += w * r.x_d;
        grad[3] += w * r.x_g;
      }
    }
    return obj;
  };

  const auto& starts = cfg.multistart_grid.empty() ? default_delta_grid(freeze_gamma_d)
                                                   : cfg.multistart_grid;
  const std::size_t want = freeze_gamma_d ? 3 : 4;
  for (const auto& s : starts)
    if (s.size() != want)
      throw ConfigError("multistart point has wrong dimension for this fit");

  const MinimizeResult res = multistart_minimize(objective, starts, cfg);

  DeltaFit out;
  out.params.k = std::exp(res.x[0]);
  out.params.gamma_n = res.x[1];
  out.params.gamma_d = freeze_gamma_d ? 0.0 : res.x[2];
  out.params.gamma_g = freeze_gamma_d ? res.x[2] : res.x[3];
  out.info.objective = res.value;
  out.info.converged = res.converged;
  out.info.n_starts_used = static_cast<int>(starts.size());
  std::vector<double> pred, act;
  pred.reserve(observations.size());
  act.reserve(observations.size());
  for (const auto& o : observations) {
    pred.push_back(laws::delta(out.params, o.n_params, o.d_tokens, o.g_eff));
    act.push_back(o.delta);
  }
  std::tie(out.info.mse, out.info.r_squared) = metrics_impl(pred, act);
  return out;
}

laws::DeltaParams fit_delta_ols(std::span<const DeltaObservation> observations) {
  const auto rows = delta_rows(observations);
  // Normal equations for y = c0 + c1 * x_d + c2 * x_g + c3 * (-x_n).
  constexpr int kDim = 4;
  double xtx[kDim][kDim] = {};
  double xty[kDim] = {};
  for (const DeltaRow& r : rows) {
    const double feats[kDim] = {1.0, r.x_d, r.x_g, -r.x_n};
    for (int i = 0; i < kDim; ++i) {
      xty[i] += feats[i] * r.y;
      for (int j = 0; j < kDim; ++j) xtx[i][j] += feats[i] * feats[j];
    }
  }
  // Gaussian elimination with partial pivoting.
  double aug[kDim][kDim + 1];
  for (int i = 0; i < kDim; ++i) {
    for (int j = 0; j < kDim; ++j) aug[i][j] = xtx[i][j];
    aug[i][kDim] = xty[i];
  }
  for (int col = 0; col < kDim; ++col) {
    int pivot = col;
    for (int r = col + 1; r < kDim; ++r)
      if (std::fabs(aug[r][col]) > std::fabs(aug[pivot][col])) pivot = r;
    if (std::fabs(aug[pivot][col]) < 1e-12)
      throw SingularDesign("fit_delta_ols: singular design matrix");
    if (pivot != col)
      for (int j = 0; j <= kDim; ++j) std::swap(aug[pivot][j], aug[col][j]);
    for (int r = 0; r < kDim; ++r) {
      if (r == col) continue;
      const double factor = aug[r][col] / aug[col][col];
      for (int j = col; j <= kDim; ++j) aug[r][j] -= factor * aug[col][j];
    }
  }
  laws::DeltaParams p;
  p.k = std::exp(aug[0][kDim] / aug[0][0]);
  p.gamma_d = aug[1][kDim] / aug[1][1];
  p.gamma_g = aug[2][kDim] / aug[2][2];
  p.gamma_n = aug[3][kDim] / aug[3][3];
  return p;
}

std::pair<double, double> fit_metrics(std::span<const double> predicted,
                                      std::span<const double> actual) {
  return metrics_impl(predicted, actual);
}

AblateDResult ablate_d(std::span<const DeltaObservation> observations,
                       const OptimConfig& cfg, const HuberConfig& huber_cfg) {
  AblateDResult out;
  OptimConfig with_cfg = cfg;
  with_cfg.multistart_grid.clear();  // grids differ in dimension between the two fits
  out.fit_with_d = fit_delta(observations, with_cfg, huber_cfg, false);
  out.fit_without_d = fit_delta(observations, with_cfg, huber_cfg, true);
  std::vector<double> act, pred_with, pred_without;
  for (const auto& o : observations) {
    act.push_back(o.delta);
    pred_with.push_back(laws::delta(out.fit_with_d.params, o.n_params, o.d_tokens, o.g_eff));
    pred_without.push_back(
        laws::delta(out.fit_without_d.params, o.n_params, o.d_tokens, o.g_eff));
  }
  out.relative_error_with_d = laws::relative_error(pred_with, act);
  out.relative_error_without_d = laws::relative_error(pred_without, act);
  return out;
}

}  // namespace qatlaw::fit
