#pragma once

// Exact finite-n laws of the sieve statistics via the decrement-chain
// recursions, plus the truncated series for the limiting empty-box counts.
// All dynamic programs here have nonnegative terms only and run in double
// precision; the alternating-sum routes live in the multiprecision header.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "occlab/model.hpp"
#include "occlab/rows.hpp"
#include "occlab/special.hpp"

namespace occlab {

// Probability mass function on a contiguous integer range with an explicit
// truncation remainder; stored mass plus deficit is 1 up to arithmetic error.
struct Pmf {
  long long offset = 0;
  std::vector<double> probs;
  double mass_deficit = 0.0;

  double at(long long k) const {
    long long i = k - offset;
    if (i < 0 || i >= static_cast<long long>(probs.size())) return 0.0;
    return probs[static_cast<size_t>(i)];
  }
  long long support_max() const {
    return offset + static_cast<long long>(probs.size()) - 1;
  }
  double total() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
  }
  double mean() const {
    double s = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      s += static_cast<double>(offset + static_cast<long long>(i)) * probs[i];
    }
    return s;
  }
  double variance() const {
    double m = mean(), s = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      double k = static_cast<double>(offset + static_cast<long long>(i));
      s += (k - m) * (k - m) * probs[i];
    }
    return s;
  }
  // P{X >= k} over the stored support.
  double tail_ge(long long k) const {
    double s = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      if (offset + static_cast<long long>(i) >= k) s += probs[i];
    }
    return s;
  }
  // Drops leading/trailing exact zeros, keeping the invariants intact.
  void trim() {
    size_t lo = 0;
    while (lo + 1 < probs.size() && probs[lo] == 0.0) ++lo;
    size_t hi = probs.size();
    while (hi > lo + 1 && probs[hi - 1] == 0.0) --hi;
    if (lo > 0 || hi < probs.size()) {
      probs = std::vector<double>(probs.begin() + static_cast<long>(lo),
                                  probs.begin() + static_cast<long>(hi));
      offset += static_cast<long long>(lo);
    }
  }
  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "k,probability\n";
    for (size_t i = 0; i < probs.size(); ++i) {
      os << (offset + static_cast<long long>(i)) << "," << probs[i] << "\n";
    }
    os << "# mass_deficit=" << mass_deficit << "\n";
    return os.str();
  }
};

namespace exactdetail {

constexpr double kDeficitTarget = 1e-12;
constexpr int kLevelCap = 1000000;

}  // namespace exactdetail

// Law of the index of the last occupied box. The chain state is the number of
// balls still in play; one level per box index, states swept per level.
inline Pmf kstar_pmf(const XiModel& model, int n, int k_max = -1) {
  if (n == 0) return Pmf{0, {1.0}, 0.0};
  RowSource src(model, n);
  std::vector<double> prev(static_cast<size_t>(n) + 1, 0.0);
  std::vector<double> cur(static_cast<size_t>(n) + 1, 0.0);
  std::vector<double> buf(static_cast<size_t>(n) + 1, 0.0);
  prev[0] = 1.0;
  Pmf out;
  out.offset = 1;
  double mass = 0.0;
  int k = 0;
  while (true) {
    ++k;
    if (k_max >= 0 && k > k_max) break;
    cur[0] = 0.0;
    for (int j = 1; j <= n; ++j) {
      src.starred(j, buf.data());
      double acc = 0.0;
      for (int d = 0; d <= j; ++d) acc += buf[static_cast<size_t>(d)] * prev[static_cast<size_t>(j - d)];
      cur[static_cast<size_t>(j)] = acc;
    }
    out.probs.push_back(cur[static_cast<size_t>(n)]);
    mass += cur[static_cast<size_t>(n)];
    std::swap(prev, cur);
    if (k_max < 0 && 1.0 - mass < exactdetail::kDeficitTarget) break;
    if (k > exactdetail::kLevelCap) {
      throw NumericalError("kstar_pmf level cap exceeded before mass target");
    }
  }
  out.mass_deficit = std::max(0.0, 1.0 - mass);
  out.trim();
  return out;
}

// Law of the number of occupied boxes; support is exactly {1..n}.
inline Pmf k_pmf(const XiModel& model, int n) {
  if (n == 0) return Pmf{0, {1.0}, 0.0};
  RowSource src(model, n);
  // tri[j][k] = P{K_j = k}; triangular in j.
  std::vector<std::vector<double>> tri(static_cast<size_t>(n) + 1);
  tri[0] = {1.0};
  std::vector<double> buf(static_cast<size_t>(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j) {
    src.plain(j, buf.data());
    auto& row = tri[static_cast<size_t>(j)];
    row.assign(static_cast<size_t>(j) + 1, 0.0);
    for (int d = 1; d <= j; ++d) {
      double q = buf[static_cast<size_t>(d)];
      const auto& sub = tri[static_cast<size_t>(j - d)];
      for (size_t kk = 0; kk < sub.size(); ++kk) row[kk + 1] += q * sub[kk];
    }
  }
  Pmf out;
  out.offset = 0;
  out.probs = std::move(tri[static_cast<size_t>(n)]);
  out.mass_deficit = std::max(0.0, 1.0 - out.total());
  out.trim();
  return out;
}

// Level matrices for the empty-box count: L[i][r] = P{K_{r,0} = i} for
// r = 0..n_max, i = 0..i_max. The no-capture self-term couples level i to
// level i-1, so levels fill together in one ascending sweep over r with each
// decrement row computed once.
inline std::vector<std::vector<double>> k0_levels(const XiModel& model,
                                                  int n_max, int i_max) {
  RowSource src(model, n_max);
  std::vector<std::vector<double>> L(
      static_cast<size_t>(i_max) + 1,
      std::vector<double>(static_cast<size_t>(n_max) + 1, 0.0));
  L[0][0] = 1.0;
  std::vector<double> buf(static_cast<size_t>(n_max) + 1, 0.0);
  for (int r = 1; r <= n_max; ++r) {
    src.starred(r, buf.data());
    for (int i = 0; i <= i_max; ++i) {
      double acc = (i > 0) ? buf[0] * L[static_cast<size_t>(i - 1)][static_cast<size_t>(r)] : 0.0;
      const auto& Li = L[static_cast<size_t>(i)];
      for (int d = 1; d <= r; ++d) acc += buf[static_cast<size_t>(d)] * Li[static_cast<size_t>(r - d)];
      L[static_cast<size_t>(i)][static_cast<size_t>(r)] = acc;
    }
  }
  return L;
}

// Level matrices for the empty-or-singleton count Y: the chain increments on
// decrements leaving at most one ball behind, so both the no-capture term and
// the single-survivor term reference level i-1.
inline std::vector<std::vector<double>> y_levels(const XiModel& model, int n_max,
                                                 int i_max) {
  RowSource src(model, n_max);
  std::vector<std::vector<double>> Y(
      static_cast<size_t>(i_max) + 1,
      std::vector<double>(static_cast<size_t>(n_max) + 1, 0.0));
  Y[0][0] = 1.0;
  std::vector<double> buf(static_cast<size_t>(n_max) + 1, 0.0);
  for (int r = 1; r <= n_max; ++r) {
    src.starred(r, buf.data());
    for (int i = 0; i <= i_max; ++i) {
      double acc = 0.0;
      if (i > 0) {
        acc += buf[0] * Y[static_cast<size_t>(i - 1)][static_cast<size_t>(r)];
        acc += buf[1] * Y[static_cast<size_t>(i - 1)][static_cast<size_t>(r - 1)];
      }
      const auto& Yi = Y[static_cast<size_t>(i)];
      for (int d = 2; d <= r; ++d) acc += buf[static_cast<size_t>(d)] * Yi[static_cast<size_t>(r - d)];
      Y[static_cast<size_t>(i)][static_cast<size_t>(r)] = acc;
    }
  }
  return Y;
}

namespace exactdetail {

template <class LevelsFn>
Pmf pmf_from_levels(const LevelsFn& levels_fn, int n, int i_max) {
  if (n == 0) return Pmf{0, {1.0}, 0.0};
  int cap = (i_max >= 0) ? i_max : 64;
  while (true) {
    auto L = levels_fn(n, cap);
    Pmf out;
    out.offset = 0;
    out.probs.resize(static_cast<size_t>(cap) + 1);
    double mass = 0.0;
    for (int i = 0; i <= cap; ++i) {
      out.probs[static_cast<size_t>(i)] = L[static_cast<size_t>(i)][static_cast<size_t>(n)];
      mass += out.probs[static_cast<size_t>(i)];
    }
    out.mass_deficit = std::max(0.0, 1.0 - mass);
    if (i_max >= 0 || out.mass_deficit < kDeficitTarget) {
      out.trim();
      return out;
    }
    if (cap > kLevelCap) {
      throw NumericalError("level cap exceeded before mass target");
    }
    cap *= 2;
  }
}

}  // namespace exactdetail

// Law of the number of empty boxes below the last occupied one.
inline Pmf k0_pmf(const XiModel& model, int n, int i_max = -1) {
  return exactdetail::pmf_from_levels(
      [&model](int nn, int cap) { return k0_levels(model, nn, cap); }, n, i_max);
}

// Law of Y_n, the number of boxes holding at most one ball up to the last
// occupied box (empty boxes plus singleton boxes).
inline Pmf y_pmf(const XiModel& model, int n, int i_max = -1) {
  return exactdetail::pmf_from_levels(
      [&model](int nn, int cap) { return y_levels(model, nn, cap); }, n, i_max);
}

// Probability that the ball-count chain started from n ever visits state m.
struct VisitTable {
  int n_max = 0;
  // cols[m][n - m] = g(n, m) for 1 <= m <= n <= n_max.
  std::vector<std::vector<double>> cols;

  double g(int n, int m) const {
    return cols[static_cast<size_t>(m)][static_cast<size_t>(n - m)];
  }
};

inline std::shared_ptr<const VisitTable> visit_probs(const XiModel& model,
                                                     int n_max) {
  static std::map<std::uint64_t, std::shared_ptr<const VisitTable>> cache;
  static std::mutex mu;
  std::uint64_t key = model.fingerprint();
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end() && it->second->n_max >= n_max) return it->second;
  }
  auto t = std::make_shared<VisitTable>();
  t->n_max = n_max;
  t->cols.resize(static_cast<size_t>(n_max) + 1);
  for (int m = 1; m <= n_max; ++m) {
    t->cols[static_cast<size_t>(m)].assign(static_cast<size_t>(n_max - m) + 1, 0.0);
    t->cols[static_cast<size_t>(m)][0] = 1.0;  // g(m, m) = 1
  }
  RowSource src(model, n_max);
  std::vector<double> buf(static_cast<size_t>(n_max) + 1, 0.0);
  for (int n = 2; n <= n_max; ++n) {
    src.plain(n, buf.data());
    for (int m = 1; m < n; ++m) {
      const auto& col = t->cols[static_cast<size_t>(m)];
      double acc = 0.0;
      for (int j = 1; j <= n - m; ++j) acc += buf[static_cast<size_t>(j)] * col[static_cast<size_t>(n - j - m)];
      t->cols[static_cast<size_t>(m)][static_cast<size_t>(n - m)] = acc;
    }
  }
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[key];
  if (!slot || slot->n_max < n_max) slot = t;
  return slot;
}

// Law of the number of balls in the last occupied box: the chain must visit
// state m and then clear it in one sweep.
inline Pmf zn_pmf(const XiModel& model, int n) {
  if (n < 1) throw NumericalError("zn_pmf needs n >= 1");
  auto vt = visit_probs(model, n);
  RowSource src(model, n);
  Pmf out;
  out.offset = 1;
  out.probs.assign(static_cast<size_t>(n), 0.0);
  for (int m = 1; m <= n; ++m) {
    double clear = src.exi_n(m) / (1.0 - src.exibar_n(m));
    out.probs[static_cast<size_t>(m - 1)] = vt->g(n, m) * clear;
  }
  out.mass_deficit = std::max(0.0, 1.0 - out.total());
  return out;
}

// Mean empty-box count via visit probabilities: each visited state m yields
// an expected r_m = E xibar^m / (1 - E xibar^m) immediate empty boxes.
inline double e_k0_dp(const XiModel& model, int n) {
  if (n < 1) return 0.0;
  auto vt = visit_probs(model, n);
  RowSource src(model, n);
  double acc = 0.0;
  for (int m = 1; m <= n; ++m) {
    double rm = src.exibar_n(m) / (1.0 - src.exibar_n(m));
    acc += (m == n ? 1.0 : vt->g(n, m)) * rm;
  }
  return acc;
}

// Exact GEM empty-box law by convolving the geometric component laws: the
// count decomposes into (M_1 - 1)_+ + ... + (M_{n-1} - 1)_+ + M_n with M_j
// geometric on {0,1,...} with success j/(theta+j).
inline Pmf gem_k0_exact_pmf(double theta, int n) {
  if (!(theta > 0.0) || n < 1) {
    throw NumericalError("gem_k0_exact_pmf needs theta > 0, n >= 1");
  }
  std::vector<double> dist{1.0};
  std::vector<double> comp;
  for (int j = 1; j <= n; ++j) {
    double p = static_cast<double>(j) / (theta + j);
    double q = 1.0 - p;
    comp.clear();
    if (j < n) {
      // (M_j - 1)_+ : atom p(2-p) at 0, then p q^{i+1} for i >= 1.
      comp.push_back(p * (2.0 - p));
      double term = p * q * q;
      while (term > 1e-17 * p) {
        comp.push_back(term);
        term *= q;
      }
    } else {
      double term = p;
      while (term > 1e-17 * p || comp.empty()) {
        comp.push_back(term);
        term *= q;
        if (comp.size() > 4000) break;
      }
    }
    std::vector<double> next(dist.size() + comp.size() - 1, 0.0);
    for (size_t a = 0; a < dist.size(); ++a) {
      if (dist[a] == 0.0) continue;
      for (size_t b = 0; b < comp.size(); ++b) next[a + b] += dist[a] * comp[b];
    }
    dist = std::move(next);
  }
  Pmf out;
  out.offset = 0;
  out.probs = std::move(dist);
  out.mass_deficit = std::max(0.0, 1.0 - out.total());
  out.trim();
  return out;
}

// A truncated series value with its certified remainder bound.
struct TailValue {
  double value = 0.0;
  double remainder = 0.0;
};

// Summary of a family of limit tails P{X >= i}, i = 1..i_max, from one level
// computation: head_total approximates E X; the exact identities of the
// truncated series make (series_remainder + tail_gap) a certified bound on
// |E X - head_total| when the target mean is finite.
struct LimitTailSummary {
  std::vector<double> tails;
  double series_remainder = 0.0;
  double tail_gap = 0.0;
  double head_total = 0.0;
  double mean_target = 0.0;
};

namespace exactdetail {

// Sum of E xibar^j / j for j = 1..j_max; its infinite-sum value is nu.
inline double partial_nu(RowSource& src, int j_max) {
  double s = 0.0;
  for (int j = 1; j <= j_max; ++j) s += src.exibar_n(j) / j;
  return s;
}

}  // namespace exactdetail

// Tails of the limiting empty-box count. For infinite mean walk step the
// limit is degenerate at zero.
inline LimitTailSummary k0_limit_summary(const XiModel& model, int i_max,
                                         int j_max) {
  LimitTailSummary out;
  out.tails.assign(static_cast<size_t>(i_max), 0.0);
  double mu = model.mu();
  if (std::isinf(mu)) return out;  // degenerate limit: all tails zero
  double inv_mu = 1.0 / mu;
  auto L = k0_levels(model, j_max, std::max(0, i_max - 1));
  RowSource src(model, j_max);
  double pnu = exactdetail::partial_nu(src, j_max);
  for (int i = 1; i <= i_max; ++i) {
    double acc = 0.0;
    const auto& level = L[static_cast<size_t>(i - 1)];
    for (int j = 1; j <= j_max; ++j) {
      acc += (src.exibar_n(j) / j) * level[static_cast<size_t>(j)];
    }
    out.tails[static_cast<size_t>(i - 1)] = inv_mu * acc;
    out.head_total += inv_mu * acc;
  }
  out.series_remainder = (model.nu() - pnu) * inv_mu;
  out.tail_gap = std::max(0.0, inv_mu * pnu - out.head_total);
  out.mean_target = model.nu() * inv_mu;
  return out;
}

inline TailValue k0_limit_tail(const XiModel& model, int i, int j_max) {
  if (i <= 0) return {1.0, 0.0};
  if (std::isinf(model.mu())) return {0.0, 0.0};
  auto s = k0_limit_summary(model, i, j_max);
  return {s.tails[static_cast<size_t>(i - 1)], s.series_remainder};
}

// Tails of the limiting count of boxes holding at most one ball.
inline LimitTailSummary k01_limit_summary(const XiModel& model, int i_max,
                                          int j_max) {
  LimitTailSummary out;
  out.tails.assign(static_cast<size_t>(i_max), 0.0);
  double mu = model.mu();
  if (std::isinf(mu)) return out;
  double inv_mu = 1.0 / mu;
  auto Y = y_levels(model, j_max, std::max(0, i_max - 1));
  RowSource src(model, j_max);
  double exi = 1.0 - src.exibar_n(1);
  double exi2 = src.exi_n(2);
  double exibar = src.exibar_n(1);
  double pnu = exactdetail::partial_nu(src, j_max);
  // Series weight at j >= 2: E xibar^j / j + E[xibar^j xi], the latter
  // telescoping as E xibar^j - E xibar^{j+1}.
  std::vector<double> w(static_cast<size_t>(j_max) + 1, 0.0);
  for (int j = 2; j <= j_max; ++j) {
    w[static_cast<size_t>(j)] = src.exibar_n(j) / j +
        (src.exibar_n(j) - (j + 1 <= j_max ? src.exibar_n(j + 1)
                                           : model.exibar_pow(j + 1)));
  }
  for (int i = 1; i <= i_max; ++i) {
    double head = (i == 1) ? exi
                           : exi * (1.0 - exi2) * std::pow(exibar, i - 2);
    double acc = 0.0;
    const auto& level = Y[static_cast<size_t>(i - 1)];
    for (int j = 2; j <= j_max; ++j) acc += w[static_cast<size_t>(j)] * level[static_cast<size_t>(j)];
    double tail = inv_mu * (head + acc);
    out.tails[static_cast<size_t>(i - 1)] = tail;
    out.head_total += tail;
  }
  double exibar_tail = model.exibar_pow(j_max + 1);
  out.series_remainder = inv_mu * ((model.nu() - pnu) + exibar_tail);
  // Sum over all i of the truncated series, in closed form.
  double wsum = 0.0;
  for (int j = 2; j <= j_max; ++j) wsum += w[static_cast<size_t>(j)];
  double all_i = inv_mu * (exi + (1.0 - exi2) + wsum);
  out.tail_gap = std::max(0.0, all_i - out.head_total);
  out.mean_target = (model.nu() + 1.0) * inv_mu;
  return out;
}

inline TailValue k01_limit_tail(const XiModel& model, int i, int j_max) {
  if (i <= 0) return {1.0, 0.0};
  if (std::isinf(model.mu())) return {0.0, 0.0};
  auto s = k01_limit_summary(model, i, j_max);
  return {s.tails[static_cast<size_t>(i - 1)], s.series_remainder};
}

}  // namespace occlab
