#pragma once

// Decrement rows. The starred row holds
//
//   q*(n:m) = C(n,m) E[xi^m xibar^{n-m}],  m = 0..n,
//
// the law of the number of balls captured by the first box when n remain; the
// plain row conditions on at least one capture, q(n:m) = q*(n:m)/(1 - E xibar^n).
//
// Beta-kind models use the closed product form of the mixed moment. All other
// models integrate in u-space,
//
//   I(n,m) = int_0^1 Q(u)^{n-m} (1 - Q(u))^m du,
//
// where Q is the xibar quantile. The integrand h is unimodal for any monotone
// Q, so each entry is handled by locating the peak u* = F((n-m)/n), finding
// the window where log h is within 50 of its peak by bisection, and applying
// one 64-point Gauss-Legendre rule on an interior window, or a uniform-then-
// dyadic panel scheme (8 uniform panels, then 48 halving panels of the edge
// eighth, 16-point each) when the window reaches an endpoint where quantile
// derivatives can blow up. Custom models with unknown smoothness use adaptive
// Gauss-Kronrod per entry instead.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "occlab/model.hpp"
#include "occlab/quadrature.hpp"
#include "occlab/special.hpp"

namespace occlab {

struct DecrementRow {
  int n = 0;
  bool starred = true;
  std::vector<double> q;  // indexed by decrement m; plain rows keep q[0] = 0

  double sum() const {
    double s = 0.0;
    for (double v : q) s += v;
    return s;
  }
};

namespace rowdetail {

// log of Q(u)^{n-m} (1-Q(u))^m with 0 * (-inf) guarded to 0.
inline double log_h(const XiModel& model, int n, int m, double u) {
  if (u <= 0.0) {
    if (n - m > 0) return -std::numeric_limits<double>::infinity();
    return 0.0;  // m = n: h -> 1 as u -> 0
  }
  if (u >= 1.0) {
    if (m > 0) return -std::numeric_limits<double>::infinity();
    return 0.0;  // m = 0: h -> 1 as u -> 1
  }
  double acc = 0.0;
  if (n - m > 0) {
    double q = model.quantile_xibar(u);
    acc += (q > 0.0) ? (n - m) * std::log(q)
                     : -std::numeric_limits<double>::infinity();
  }
  if (m > 0) {
    double x = model.xi_of_u(u);
    acc += (x > 0.0) ? m * std::log(x) : -std::numeric_limits<double>::infinity();
  }
  return acc;
}

// One windowed entry: returns log I(n,m).
inline double log_entry(const XiModel& model, int n, int m) {
  const double drop = 50.0;
  double ustar = model.cdf_xibar(static_cast<double>(n - m) / n);
  double upeak = std::clamp(ustar, 1e-13, 1.0 - 1e-13);
  double lh_peak = log_h(model, n, m, upeak);
  double target = lh_peak - drop;

  bool touch_l = log_h(model, n, m, 0.0) > target;
  bool touch_r = log_h(model, n, m, 1.0) > target;
  double u_lo = 0.0, u_hi = 1.0;
  if (!touch_l) {
    double lo = 0.0, hi = upeak;
    for (int i = 0; i < 60; ++i) {
      double mid = 0.5 * (lo + hi);
      if (log_h(model, n, m, mid) < target) lo = mid; else hi = mid;
    }
    u_lo = lo;
  }
  if (!touch_r) {
    double lo = upeak, hi = 1.0;
    for (int i = 0; i < 60; ++i) {
      double mid = 0.5 * (lo + hi);
      if (log_h(model, n, m, mid) < target) hi = mid; else lo = mid;
    }
    u_hi = hi;
  }
  double width = u_hi - u_lo;
  // Extend near-endpoint windows to the endpoint: quantile derivatives can be
  // huge just outside the window, and the dyadic scheme absorbs them.
  if (!touch_l && u_lo < 0.5 * width) {
    touch_l = true;
    u_lo = 0.0;
  }
  if (!touch_r && 1.0 - u_hi < 0.5 * width) {
    touch_r = true;
    u_hi = 1.0;
  }

  auto g = [&](double u) {
    double lh = log_h(model, n, m, u);
    return std::isfinite(lh) ? std::exp(lh - lh_peak) : 0.0;
  };

  const GlRule& gl64 = gl_rule(64);
  const GlRule& gl16 = gl_rule(16);

  // Integrates [a, b] with panels accumulating toward the edge at `toward`.
  auto dyadic_half = [&](double a, double b, bool toward_left) {
    const int kdyad = 48;
    double w = b - a;
    double acc = 0.0;
    double prev = 1.0;  // fraction of width, measured from the far edge
    auto frac_at = [&](int idx) {
      if (idx < 7) return (7.0 - idx) / 8.0;  // 7/8 down to 1/8
      return (1.0 / 8.0) * std::pow(0.5, idx - 6);
    };
    for (int idx = 0; idx < 7 + kdyad; ++idx) {
      double fr = frac_at(idx);
      double p0, p1;
      if (toward_left) {
        p0 = a + fr * w;
        p1 = a + prev * w;
      } else {
        p0 = b - prev * w;
        p1 = b - fr * w;
      }
      acc += integrate_gl(g, p0, p1, gl16);
      prev = fr;
    }
    // Remaining sliver next to the edge (relative width 2^{-51}).
    if (toward_left) acc += integrate_gl(g, a, a + prev * w, gl16);
    else acc += integrate_gl(g, b - prev * w, b, gl16);
    return acc;
  };

  double integral;
  if (!touch_l && !touch_r) {
    integral = integrate_gl(g, u_lo, u_hi, gl64);
  } else if (touch_l && touch_r) {
    double split = std::clamp(upeak, 0.25, 0.75);
    integral = dyadic_half(u_lo, split, true) + dyadic_half(split, u_hi, false);
  } else if (touch_l) {
    integral = dyadic_half(u_lo, u_hi, true);
  } else {
    integral = dyadic_half(u_lo, u_hi, false);
  }
  if (!(integral > 0.0)) return -std::numeric_limits<double>::infinity();
  return lh_peak + std::log(integral);
}

inline double custom_entry(const XiModel& model, int n, int m) {
  auto f = [&](double u) {
    double q = model.quantile_xibar(u);
    double x = model.xi_of_u(u);
    double acc = 1.0;
    if (n - m > 0) acc *= std::pow(q, static_cast<double>(n - m));
    if (m > 0) acc *= std::pow(x, static_cast<double>(m));
    return acc;
  };
  return integrate_adaptive(f, 0.0, 1.0, 1e-14, 4000);
}

}  // namespace rowdetail

// Starred row values q*(n:m), m = 0..n.
inline std::vector<double> qstar_row_values(const XiModel& model, int n) {
  std::vector<double> q(static_cast<size_t>(n) + 1, 0.0);
  if (n == 0) {
    q[0] = 1.0;
    return q;
  }
  if (model.beta_kind()) {
    double b = model.beta_b(), c = model.beta_c();
    double lq0 = 0.0;
    for (int t = 0; t < n; ++t) lq0 += std::log((c + t) / (b + c + t));
    q[0] = std::exp(lq0);
    for (int m = 0; m < n; ++m) {
      q[static_cast<size_t>(m) + 1] = q[static_cast<size_t>(m)] *
          (static_cast<double>(n - m) / (m + 1)) * ((b + m) / (c + n - m - 1));
    }
    return q;
  }
  if (model.kind() == ModelKind::Custom) {
    for (int m = 0; m <= n; ++m) {
      double v = std::exp(log_comb(n, m)) * rowdetail::custom_entry(model, n, m);
      if (v < 0.0) {
        if (v < -1e-9) {
          throw NumericalError("decrement row entry negative beyond tolerance");
        }
        v = 0.0;
      }
      q[static_cast<size_t>(m)] = v;
    }
    return q;
  }
  for (int m = 0; m <= n; ++m) {
    double lv = log_comb(n, m) + rowdetail::log_entry(model, n, m);
    q[static_cast<size_t>(m)] = std::isfinite(lv) ? std::exp(lv) : 0.0;
  }
  return q;
}

inline DecrementRow qstar_row(const XiModel& model, int n) {
  DecrementRow r;
  r.n = n;
  r.starred = true;
  r.q = qstar_row_values(model, n);
  return r;
}

inline DecrementRow q_row(const XiModel& model, int n) {
  DecrementRow r;
  r.n = n;
  r.starred = false;
  r.q = qstar_row_values(model, n);
  double denom = 1.0 - r.q[0];
  r.q[0] = 0.0;
  for (size_t m = 1; m < r.q.size(); ++m) r.q[m] /= denom;
  return r;
}

// Precomputed triangle of starred rows for n = 0..n_max, shared process-wide
// per (model fingerprint, n_max). Quantile-kind models pay quadrature once.
class RowTriangle {
 public:
  static std::shared_ptr<const RowTriangle> get(const XiModel& model, int n_max) {
    static std::map<std::uint64_t, std::shared_ptr<const RowTriangle>> cache;
    static std::mutex mu;
    std::uint64_t key = model.fingerprint();
    {
      std::lock_guard<std::mutex> lock(mu);
      auto it = cache.find(key);
      if (it != cache.end() && it->second->n_max_ >= n_max) return it->second;
    }
    auto fresh = std::shared_ptr<const RowTriangle>(new RowTriangle(model, n_max));
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[key];
    if (!slot || slot->n_max_ < n_max) slot = fresh;
    return slot;
  }

  int n_max() const { return n_max_; }
  const std::vector<double>& starred(int n) const {
    return rows_[static_cast<size_t>(n)];
  }

 private:
  RowTriangle(const XiModel& model, int n_max) : n_max_(n_max) {
    rows_.reserve(static_cast<size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) rows_.push_back(qstar_row_values(model, n));
  }

  int n_max_ = 0;
  std::vector<std::vector<double>> rows_;
};

// Row access for dynamic programs: beta-kind models stream rows from the
// closed recurrence (nothing stored beyond one cumulative-log table), other
// models read the shared triangle.
class RowSource {
 public:
  RowSource(const XiModel& model, int n_max) : model_(model), n_max_(n_max) {
    if (model.beta_kind()) {
      log_exibar_.resize(static_cast<size_t>(n_max) + 1, 0.0);
      log_exi_.resize(static_cast<size_t>(n_max) + 1, 0.0);
      double b = model.beta_b(), c = model.beta_c();
      for (int t = 0; t < n_max; ++t) {
        log_exibar_[static_cast<size_t>(t) + 1] =
            log_exibar_[static_cast<size_t>(t)] + std::log((c + t) / (b + c + t));
        log_exi_[static_cast<size_t>(t) + 1] =
            log_exi_[static_cast<size_t>(t)] + std::log((b + t) / (b + c + t));
      }
    } else {
      tri_ = RowTriangle::get(model, n_max);
    }
  }

  int n_max() const { return n_max_; }

  // E xibar^n, the no-capture entry q*(n:0).
  double exibar_n(int n) const {
    if (!log_exibar_.empty()) return std::exp(log_exibar_[static_cast<size_t>(n)]);
    return tri_->starred(n)[0];
  }

  // E xi^n, the total-capture entry q*(n:n).
  double exi_n(int n) const {
    if (!log_exi_.empty()) return std::exp(log_exi_[static_cast<size_t>(n)]);
    return tri_->starred(n)[static_cast<size_t>(n)];
  }

  // Writes q*(n:m) into out[0..n].
  void starred(int n, double* out) const {
    if (!log_exibar_.empty()) {
      double b = model_.beta_b(), c = model_.beta_c();
      out[0] = std::exp(log_exibar_[static_cast<size_t>(n)]);
      for (int m = 0; m < n; ++m) {
        out[m + 1] = out[m] * (static_cast<double>(n - m) / (m + 1)) *
                     ((b + m) / (c + n - m - 1));
      }
      return;
    }
    const auto& row = tri_->starred(n);
    std::copy(row.begin(), row.end(), out);
  }

  // Writes q(n:m) into out[0..n] with out[0] = 0.
  void plain(int n, double* out) const {
    starred(n, out);
    double denom = 1.0 - out[0];
    out[0] = 0.0;
    for (int m = 1; m <= n; ++m) out[m] /= denom;
  }

 private:
  XiModel model_;
  int n_max_ = 0;
  std::vector<double> log_exibar_;
  std::vector<double> log_exi_;
  std::shared_ptr<const RowTriangle> tri_;
};

}  // namespace occlab
