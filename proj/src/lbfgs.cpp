#include "qatlaw/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace qatlaw::fit {

namespace {

constexpr double kC1 = 1e-4;  // sufficient decrease
constexpr double kC2 = 0.9;   // curvature
constexpr int kMaxLineSearchEvals = 60;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct Eval {
  double f;
  double dg;  // directional derivative g(x + a*d) . d
};

// Cubic interpolation step for the zoom phase; falls back to bisection when
// the cubic is degenerate or leaves the bracket interior.
double interpolate(double a_lo, double f_lo, double dg_lo, double a_hi, double f_hi,
                   double dg_hi) {
  const double d1 = dg_lo + dg_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi);
  const double disc = d1 * d1 - dg_lo * dg_hi;
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), a_hi - a_lo);
    double t = a_hi - (a_hi - a_lo) * (dg_hi + d2 - d1) / (dg_hi - dg_lo + 2.0 * d2);
    const double lo = std::min(a_lo, a_hi), hi = std::max(a_lo, a_hi);
    const double margin = 0.1 * (hi - lo);
    if (std::isfinite(t) && t > lo + margin && t < hi - margin) return t;
  }
  return 0.5 * (a_lo + a_hi);
}

}  // namespace

MinimizeResult lbfgs_minimize(const Objective& objective, std::span<const double> x0,
                              const OptimConfig& cfg) {
  cfg.validate();
  const std::size_t n = x0.size();
  if (n == 0) throw ConfigError("lbfgs_minimize: empty parameter vector");

  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> g(n, 0.0);
  double f = objective(x, g);
  if (!std::isfinite(f)) throw NonFiniteObjective("objective not finite at start point");

  MinimizeResult best;
  best.x = x;
  best.value = f;

  // Evaluate with non-finite values mapped to +inf so the line search backs off.
  std::vector<double> xt(n), gt(n);
  auto eval_at = [&](std::span<const double> d, double alpha) -> Eval {
    for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + alpha * d[i];
    double ft = objective(xt, gt);
    if (!std::isfinite(ft)) return {std::numeric_limits<double>::infinity(), 0.0};
    return {ft, dot(gt, d)};
  };

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> dir(n), alpha_buf;

  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    if (norm2(g) <= cfg.grad_tol) {
      best.x = x;
      best.value = f;
      best.converged = true;
      break;
    }

    // Two-loop recursion for dir = -H g.
    for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
    const int m = static_cast<int>(s_hist.size());
    alpha_buf.assign(m, 0.0);
    for (int i = m - 1; i >= 0; --i) {
      alpha_buf[i] = rho_hist[i] * dot(s_hist[i], dir);
      for (std::size_t j = 0; j < n; ++j) dir[j] -= alpha_buf[i] * y_hist[i][j];
    }
    if (m > 0) {
      const double gamma = dot(s_hist[m - 1], y_hist[m - 1]) /
                           dot(y_hist[m - 1], y_hist[m - 1]);
      for (std::size_t j = 0; j < n; ++j) dir[j] *= gamma;
    }
    for (int i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * dot(y_hist[i], dir);
      for (std::size_t j = 0; j < n; ++j) dir[j] += s_hist[i][j] * (alpha_buf[i] - beta);
    }

    double dg0 = dot(g, dir);
    if (!(dg0 < 0.0)) {
      // Not a descent direction: drop the history and fall back to -g.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      dg0 = dot(g, dir);
    }

    // Strong Wolfe line search: bracket then zoom.
    const double alpha_init = iter == 0 ? std::min(1.0, 1.0 / norm2(g)) : 1.0;
    double a_prev = 0.0, f_prev = f, dg_prev = dg0;
    double alpha = alpha_init;
    double a_acc = -1.0;
    Eval acc{};
    int evals = 0;
    double a_lo = 0.0, f_lo = f, dg_lo = dg0, a_hi = 0.0, f_hi = 0.0, dg_hi = 0.0;
    bool zoom = false;

    while (evals < kMaxLineSearchEvals) {
      Eval e = eval_at(dir, alpha);
      ++evals;
      if (e.f > f + kC1 * alpha * dg0 || (evals > 1 && e.f >= f_prev)) {
        a_lo = a_prev; f_lo = f_prev; dg_lo = dg_prev;
        a_hi = alpha; f_hi = e.f; dg_hi = e.dg;
        zoom = true;
        break;
      }
      if (std::fabs(e.dg) <= -kC2 * dg0) {
        a_acc = alpha; acc = e;
        break;
      }
      if (e.dg >= 0.0) {
        a_lo = alpha; f_lo = e.f; dg_lo = e.dg;
        a_hi = a_prev; f_hi = f_prev; dg_hi = dg_prev;
        zoom = true;
        break;
      }
      a_prev = alpha; f_prev = e.f; dg_prev = e.dg;
      alpha *= 2.0;
    }

    if (zoom) {
      while (evals < kMaxLineSearchEvals) {
        const double aj = interpolate(a_lo, f_lo, dg_lo, a_hi, f_hi, dg_hi);
        Eval e = eval_at(dir, aj);
        ++evals;
        if (e.f > f + kC1 * aj * dg0 || e.f >= f_lo) {
          a_hi = aj; f_hi = e.f; dg_hi = e.dg;
        } else {
          if (std::fabs(e.dg) <= -kC2 * dg0) {
            a_acc = aj; acc = e;
            break;
          }
          if (e.dg * (a_hi - a_lo) >= 0.0) {
            a_hi = a_lo; f_hi = f_lo; dg_hi = dg_lo;
          }
          a_lo = aj; f_lo = e.f; dg_lo = e.dg;
        }
        if (std::fabs(a_hi - a_lo) <= 1e-16 * std::max(1.0, std::fabs(a_lo))) break;
      }
      // Accept the sufficient-decrease point even if curvature never held.
      if (a_acc < 0.0 && a_lo > 0.0 && f_lo < f) {
        a_acc = a_lo;
        Eval e = eval_at(dir, a_lo);
        acc = e;
      }
    }

    if (a_acc <= 0.0 || !std::isfinite(acc.f)) {
      best.line_search_failed = true;
      break;  // keep best iterate
    }

    // Accept the step and update history.
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double xn = x[i] + a_acc * dir[i];
      s[i] = xn - x[i];
      x[i] = xn;
    }
    // gt holds the gradient at the accepted point from the last eval_at call;
    // re-evaluate to make sure it corresponds to a_acc.
    for (std::size_t i = 0; i < n; ++i) xt[i] = x[i];
    f = objective(xt, gt);
    if (!std::isfinite(f)) {
      best.line_search_failed = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = gt[i] - g[i];
      g[i] = gt[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-300) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (f < best.value) {
      best.value = f;
      best.x = x;
    }
  }

  if (norm2(g) <= cfg.grad_tol) {
    best.converged = true;
    best.x = x;
    best.value = f;
  }
  best.iterations = iter;
  return best;
}

}  // namespace qatlaw::fit
