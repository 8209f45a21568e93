#pragma once

// Monte Carlo engines for the occupancy scheme: direct stick-breaking with
// binomial thinning, the equivalent sorted-exponential random-walk
// construction, fast samplers for the last occupied box and its occupancy
// alone, the renewal counter, the undershoot sampler, and a poissonized
// variant.
//
// Every sampler draws from a counter-based replicate stream, and
// run_replicates assigns replicate i the stream (seed, i), so batch output
// is bitwise identical for any worker count or thread schedule.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "occlab/model.hpp"
#include "occlab/rng.hpp"
#include "occlab/special.hpp"

namespace occlab {

// Occupancy counts per box, stopping at the last occupied box. Zero entries
// before the last occupied box are kept; the sequence is empty iff n = 0.
struct WeakComposition {
  std::vector<long long> counts;
  long long n = 0;
};

// Per-realization functionals of one composition. The first-empty index w
// uses the sentinel kstar + 1 when no box before the last occupied one is
// empty, which keeps v = 0 exactly in that case.
struct SieveStats {
  long long kstar = 0;  // index of the last occupied box
  long long k = 0;      // number of occupied boxes
  long long k0 = 0;     // empty boxes left of the last occupied one
  long long k1 = 0;     // boxes holding exactly one ball
  long long w = 1;      // first empty box, sentinel kstar + 1 if none
  long long z = 0;      // balls in the last occupied box
  long long v = 0;      // balls strictly right of the first empty box
};

// One step of the renewal walk, -log xibar, drawn with the same law as the
// per-box capture fractions. Beta-kind models use a gamma pair so the step
// stays accurate when xibar is close to 1; the heavy-tailed quantile models
// get cancellation-free closed forms.
inline double walk_step(const XiModel& model, Stream& stream) {
  if (model.beta_kind()) {
    double x = stream.gamma(model.beta_c());
    double y = stream.gamma(model.beta_b());
    return std::log1p(y / x);
  }
  double u = stream.u01();
  switch (model.kind()) {
    case ModelKind::LogPareto:
      return std::expm1(-std::log(u) / model.alpha());
    case ModelKind::Example27: {
      double t = u / (1.0 - u);
      if (t < 1e-8) return -std::log(t) + 0.5 * t;
      return -std::log1p(-std::exp(-t));
    }
    default:
      return -std::log(model.quantile_xibar(u));
  }
}

// Capture fraction for one box, consistent in law with walk_step.
inline double xi_draw(const XiModel& model, Stream& stream) {
  if (model.beta_kind()) {
    double x = stream.gamma(model.beta_c());
    double y = stream.gamma(model.beta_b());
    return y / (x + y);
  }
  return model.xi_of_u(stream.u01());
}

// Stick-breaking dynamics: box j captures Binomial(remaining, xi_j) balls
// with a fresh xi per box, until every ball is placed. The loop length is
// exactly the index of the last occupied box, so the cost is O(log n)
// binomial draws for models with finite mean step.
inline WeakComposition simulate_composition(const XiModel& model, long long n,
                                            Stream& stream) {
  if (n < 0) throw NumericalError("simulate_composition needs n >= 0");
  WeakComposition comp;
  comp.n = n;
  long long remaining = n;
  while (remaining > 0) {
    long long c = stream.binomial(remaining, xi_draw(model, stream));
    comp.counts.push_back(c);
    remaining -= c;
  }
  return comp;
}

// Random-walk construction of the same law: n sorted standard exponentials
// are binned into the walk increments (S_{j-1}, S_j], stopping at the box
// that receives the maximum. Cost O(n log n).
inline WeakComposition simulate_composition_walkpoints(const XiModel& model,
                                                       long long n,
                                                       Stream& stream) {
  if (n < 0) throw NumericalError("simulate_composition_walkpoints needs n >= 0");
  WeakComposition comp;
  comp.n = n;
  if (n == 0) return comp;
  std::vector<double> pts(static_cast<std::size_t>(n));
  for (double& p : pts) p = stream.exponential();
  std::sort(pts.begin(), pts.end());
  double s = 0.0;
  std::size_t idx = 0;
  while (idx < pts.size()) {
    s += walk_step(model, stream);
    long long c = 0;
    while (idx < pts.size() && pts[idx] <= s) {
      ++idx;
      ++c;
    }
    comp.counts.push_back(c);
  }
  return comp;
}

inline SieveStats stats_from_composition(const WeakComposition& comp) {
  SieveStats st;
  st.kstar = static_cast<long long>(comp.counts.size());
  std::size_t first_zero = comp.counts.size();
  for (std::size_t j = 0; j < comp.counts.size(); ++j) {
    long long c = comp.counts[j];
    if (c == 0) {
      ++st.k0;
      if (first_zero == comp.counts.size()) first_zero = j;
    } else {
      ++st.k;
      if (c == 1) ++st.k1;
    }
  }
  st.w = first_zero < comp.counts.size()
             ? static_cast<long long>(first_zero) + 1
             : st.kstar + 1;
  if (!comp.counts.empty()) st.z = comp.counts.back();
  for (std::size_t j = first_zero; j < comp.counts.size(); ++j) {
    st.v += comp.counts[j];
  }
  return st;
}

// Maximum of n standard exponentials by inverse cdf, written so the result
// keeps full relative accuracy even when n is of order 10^12 and U^{1/n}
// is within a few ulp of 1.
inline double sample_exp_max(long long n, Stream& stream) {
  double lg = std::log(stream.u01()) / static_cast<double>(n);
  return -std::log(-std::expm1(lg));
}

// Zero-delayed renewal counter: the first index k >= 1 with S_k >= t, so
// the count at t = 0 is 1.
inline long long simulate_renewal_count(const XiModel& model, double t,
                                        Stream& stream) {
  if (!(t >= 0.0)) throw NumericalError("simulate_renewal_count needs t >= 0");
  double s = 0.0;
  long long k = 0;
  do {
    s += walk_step(model, stream);
    ++k;
  } while (s < t);
  return k;
}

// Last occupied box index alone, via the identity with the renewal count
// evaluated at the exponential maximum. O(log n) time for any n.
inline long long simulate_kstar_fast(const XiModel& model, long long n,
                                     Stream& stream) {
  if (n < 1) throw NumericalError("simulate_kstar_fast needs n >= 1");
  double target = sample_exp_max(n, stream);
  double s = 0.0;
  long long k = 0;
  do {
    s += walk_step(model, stream);
    ++k;
  } while (s < target);
  return k;
}

// Joint sample of the exponential maximum, the walk's undershoot at that
// maximum, and the gaps from the maximum down to the next k_cap order
// statistics. The occupancy of the last box exceeds k exactly when the
// undershoot exceeds the k-th gap.
struct UndershootSample {
  double e_max = 0.0;
  double undershoot = 0.0;
  std::vector<double> gaps;  // gaps[k-1] = e_max minus (k+1)-th largest point
};

namespace simdetail {

// Gap from the maximum down to a truncated-exponential order statistic with
// descending-uniform log position lv, given lg = log U^{1/n} for the
// maximum. Evaluates log((1 - q v)/(1 - q)) with q = e^{lg}, v = e^{lv}
// without cancellation, which matters once n reaches 10^12 and both points
// agree to a dozen digits.
inline double gap_from_logs(double lg, double lv) {
  return std::log1p(std::exp(lg) * (-std::expm1(lv)) / (-std::expm1(lg)));
}

}  // namespace simdetail

inline UndershootSample simulate_undershoot(const XiModel& model, long long n,
                                            Stream& stream, int k_cap = 64) {
  if (n < 1) throw NumericalError("simulate_undershoot needs n >= 1");
  if (k_cap < 1) throw NumericalError("simulate_undershoot needs k_cap >= 1");
  double lg = std::log(stream.u01()) / static_cast<double>(n);
  UndershootSample out;
  out.e_max = -std::log(-std::expm1(lg));
  // Conditioned on the maximum, the other n - 1 points are iid exponentials
  // truncated to [0, e_max]; their top order statistics come from
  // descending uniform order statistics pushed through the truncated
  // quantile.
  long long m = std::min<long long>(k_cap, n - 1);
  out.gaps.reserve(static_cast<std::size_t>(m));
  double lv = 0.0;
  for (long long k = 1; k <= m; ++k) {
    lv += std::log(stream.u01()) / static_cast<double>(n - k);
    out.gaps.push_back(simdetail::gap_from_logs(lg, lv));
  }
  double s = 0.0, prev = 0.0;
  do {
    prev = s;
    s += walk_step(model, stream);
  } while (s < out.e_max);
  out.undershoot = out.e_max - prev;
  return out;
}

// Occupancy of the last occupied box alone, by the same conditional
// construction: one plus the number of order-statistic gaps smaller than
// the undershoot, extending the gap sequence only as far as needed. The
// expected cost is O(log n) walk steps plus O(E Z) extra draws.
inline long long simulate_zn_fast(const XiModel& model, long long n,
                                  Stream& stream) {
  if (n < 1) throw NumericalError("simulate_zn_fast needs n >= 1");
  double lg = std::log(stream.u01()) / static_cast<double>(n);
  double e_max = -std::log(-std::expm1(lg));
  double s = 0.0, prev = 0.0;
  do {
    prev = s;
    s += walk_step(model, stream);
  } while (s < e_max);
  double under = e_max - prev;
  long long z = 1;
  double lv = 0.0;
  for (long long k = 1; k <= n - 1; ++k) {
    lv += std::log(stream.u01()) / static_cast<double>(n - k);
    if (simdetail::gap_from_logs(lg, lv) < under) {
      ++z;
    } else {
      break;
    }
  }
  return z;
}

// Ball count drawn as Poisson(t), then the usual stick-breaking dynamics.
inline SieveStats simulate_poissonized(const XiModel& model, double t,
                                       Stream& stream) {
  if (!(t >= 0.0)) throw NumericalError("simulate_poissonized needs t >= 0");
  long long n = stream.poisson(t);
  return stats_from_composition(simulate_composition(model, n, stream));
}

enum class SimMethod {
  Composition,
  Walkpoints,
  KstarFast,
  ZnFast,
  Renewal,
  Poissonized,
};

// Bitmask selecting output columns for the composition-family methods. The
// renewal counter at t = log n rides along as an extra column when asked
// for, drawn from the same replicate stream after the composition.
namespace statfield {
inline constexpr unsigned kKstar = 1u << 0;
inline constexpr unsigned kK = 1u << 1;
inline constexpr unsigned kK0 = 1u << 2;
inline constexpr unsigned kK1 = 1u << 3;
inline constexpr unsigned kW = 1u << 4;
inline constexpr unsigned kZ = 1u << 5;
inline constexpr unsigned kV = 1u << 6;
inline constexpr unsigned kNlogn = 1u << 7;
inline constexpr unsigned kAllStats = kKstar | kK | kK0 | kK1 | kW | kZ | kV;
}  // namespace statfield

struct ReplicateRequest {
  explicit ReplicateRequest(XiModel m) : model(std::move(m)) {}

  XiModel model;
  long long n = 0;       // ball count for fixed-n methods
  double horizon = 0.0;  // threshold for Renewal, mean for Poissonized
  std::uint64_t reps = 1;
  std::uint64_t seed = 0;
  SimMethod method = SimMethod::Composition;
  unsigned stats = statfield::kAllStats;
  int workers = 0;  // 0 picks the hardware concurrency
};

// Column-per-statistic sample matrix in replicate order. When a replicate
// fails (for example an allocation failure), the table is truncated to the
// longest complete prefix and flagged rather than silently padded.
struct SampleTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  std::uint64_t completed = 0;
  bool truncated = false;
  std::string failure;

  const std::vector<double>& col(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return cols[i];
    }
    throw NumericalError("sample table has no column " + name);
  }

  void write_csv(std::ostream& os) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      os << (i ? "," : "") << names[i];
    }
    os << '\n';
    for (std::uint64_t r = 0; r < completed; ++r) {
      for (std::size_t i = 0; i < cols.size(); ++i) {
        os << (i ? "," : "")
           << static_cast<long long>(std::llround(cols[i][r]));
      }
      os << '\n';
    }
  }
};

namespace simdetail {

inline std::vector<std::string> column_names(const ReplicateRequest& req) {
  switch (req.method) {
    case SimMethod::KstarFast:
      return {"kstar"};
    case SimMethod::ZnFast:
      return {"z"};
    case SimMethod::Renewal:
      return {"count"};
    default:
      break;
  }
  std::vector<std::string> names;
  if (req.stats & statfield::kKstar) names.push_back("kstar");
  if (req.stats & statfield::kK) names.push_back("k");
  if (req.stats & statfield::kK0) names.push_back("k0");
  if (req.stats & statfield::kK1) names.push_back("k1");
  if (req.stats & statfield::kW) names.push_back("w");
  if (req.stats & statfield::kZ) names.push_back("z");
  if (req.stats & statfield::kV) names.push_back("v");
  if (req.method != SimMethod::Poissonized &&
      (req.stats & statfield::kNlogn)) {
    names.push_back("nlogn");
  }
  return names;
}

inline void fill_stats_row(const ReplicateRequest& req, const SieveStats& st,
                           bool with_nlogn, long long nlogn,
                           std::vector<std::vector<double>>& cols,
                           std::uint64_t i) {
  std::size_t c = 0;
  if (req.stats & statfield::kKstar) cols[c++][i] = static_cast<double>(st.kstar);
  if (req.stats & statfield::kK) cols[c++][i] = static_cast<double>(st.k);
  if (req.stats & statfield::kK0) cols[c++][i] = static_cast<double>(st.k0);
  if (req.stats & statfield::kK1) cols[c++][i] = static_cast<double>(st.k1);
  if (req.stats & statfield::kW) cols[c++][i] = static_cast<double>(st.w);
  if (req.stats & statfield::kZ) cols[c++][i] = static_cast<double>(st.z);
  if (req.stats & statfield::kV) cols[c++][i] = static_cast<double>(st.v);
  if (with_nlogn) cols[c++][i] = static_cast<double>(nlogn);
}

}  // namespace simdetail

inline SampleTable run_replicates(const ReplicateRequest& req) {
  if (req.reps < 1) throw NumericalError("run_replicates needs reps >= 1");
  SampleTable table;
  table.names = simdetail::column_names(req);
  if (table.names.empty()) throw NumericalError("run_replicates: empty selector");
  table.cols.assign(table.names.size(),
                    std::vector<double>(req.reps, 0.0));

  const bool with_nlogn = (req.method == SimMethod::Composition ||
                           req.method == SimMethod::Walkpoints) &&
                          (req.stats & statfield::kNlogn);
  const double log_n = req.n > 0 ? std::log(static_cast<double>(req.n)) : 0.0;

  std::atomic<std::uint64_t> first_fail{
      std::numeric_limits<std::uint64_t>::max()};
  std::mutex failure_mu;
  std::string failure_msg;

  auto fill_one = [&](std::uint64_t i) {
    Stream stream(req.seed, i);
    switch (req.method) {
      case SimMethod::Composition:
      case SimMethod::Walkpoints: {
        WeakComposition comp =
            req.method == SimMethod::Composition
                ? simulate_composition(req.model, req.n, stream)
                : simulate_composition_walkpoints(req.model, req.n, stream);
        SieveStats st = stats_from_composition(comp);
        long long nlogn = 0;
        if (with_nlogn) {
          nlogn = simulate_renewal_count(req.model, log_n, stream);
        }
        simdetail::fill_stats_row(req, st, with_nlogn, nlogn, table.cols, i);
        break;
      }
      case SimMethod::Poissonized: {
        SieveStats st = simulate_poissonized(req.model, req.horizon, stream);
        simdetail::fill_stats_row(req, st, false, 0, table.cols, i);
        break;
      }
      case SimMethod::KstarFast:
        table.cols[0][i] = static_cast<double>(
            simulate_kstar_fast(req.model, req.n, stream));
        break;
      case SimMethod::ZnFast:
        table.cols[0][i] = static_cast<double>(
            simulate_zn_fast(req.model, req.n, stream));
        break;
      case SimMethod::Renewal:
        table.cols[0][i] = static_cast<double>(
            simulate_renewal_count(req.model, req.horizon, stream));
        break;
    }
  };

  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t workers = req.workers > 0 ? static_cast<std::uint64_t>(req.workers)
                                          : static_cast<std::uint64_t>(hw);
  workers = std::min<std::uint64_t>(workers, req.reps);

  auto worker_body = [&](std::uint64_t lo, std::uint64_t hi) {
    for (std::uint64_t i = lo; i < hi; ++i) {
      if (i > first_fail.load(std::memory_order_relaxed)) break;
      try {
        fill_one(i);
      } catch (const std::exception& e) {
        std::uint64_t cur = first_fail.load(std::memory_order_relaxed);
        while (i < cur &&
               !first_fail.compare_exchange_weak(cur, i,
                                                 std::memory_order_relaxed)) {
        }
        std::lock_guard<std::mutex> lock(failure_mu);
        if (failure_msg.empty() || i <= first_fail.load()) {
          failure_msg = e.what();
        }
        break;
      }
    }
  };

  if (workers <= 1) {
    worker_body(0, req.reps);
  } else {
    std::vector<std::thread> pool;
    std::uint64_t block = (req.reps + workers - 1) / workers;
    for (std::uint64_t w = 0; w < workers; ++w) {
      std::uint64_t lo = w * block;
      std::uint64_t hi = std::min(req.reps, lo + block);
      if (lo >= hi) break;
      pool.emplace_back(worker_body, lo, hi);
    }
    for (std::thread& t : pool) t.join();
  }

  std::uint64_t fail_at = first_fail.load();
  table.completed = std::min<std::uint64_t>(req.reps, fail_at);
  table.truncated = table.completed < req.reps;
  if (table.truncated) {
    table.failure = failure_msg;
    for (std::vector<double>& c : table.cols) {
      c.resize(table.completed);
    }
  }
  return table;
}

}  // namespace occlab
