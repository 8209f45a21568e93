#pragma once

// Goodness-of-fit machinery for confronting Monte Carlo samples with exact
// pmfs and limit laws: Kolmogorov-Smirnov tests in one- and two-sample form,
// total variation against enumerated pmfs, chi-square with automatic tail
// merging, moment z-scores, and monotone trend checks across n-decades.
//
// Every test returns a TestReport that is re-runnable from its metadata and
// round-trips losslessly through the CSV row form. A test that lacks the
// data to decide sets under_powered instead of claiming a pass; strict
// consumers may treat that flag as a failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "occlab/exact.hpp"
#include "occlab/rng.hpp"
#include "occlab/special.hpp"

namespace occlab {

// KS tests with no explicit threshold pass when the asymptotic p-value stays
// above this floor. Many tests run per suite; the looseness is deliberate.
inline constexpr double kDefaultPFloor = 1e-3;

struct TestReport {
  std::string name;
  double statistic = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t n_a = 0;
  std::uint64_t n_b = 0;
  bool pass = false;
  bool under_powered = false;
  std::string metadata;

  static std::string csv_header() {
    return "name,statistic,threshold,p_value,n_a,n_b,pass,under_powered,metadata";
  }

  std::string csv_row() const {
    std::ostringstream os;
    os.precision(17);
    os << quoted(name) << ',' << statistic << ',' << threshold << ','
       << p_value << ',' << n_a << ',' << n_b << ',' << (pass ? 1 : 0) << ','
       << (under_powered ? 1 : 0) << ',' << quoted(metadata);
    return os.str();
  }

  static TestReport from_csv_row(const std::string& row) {
    std::vector<std::string> f = split_row(row);
    if (f.size() != 9) throw NumericalError("test report row needs 9 fields");
    TestReport r;
    r.name = f[0];
    r.statistic = std::strtod(f[1].c_str(), nullptr);
    r.threshold = std::strtod(f[2].c_str(), nullptr);
    r.p_value = std::strtod(f[3].c_str(), nullptr);
    r.n_a = std::strtoull(f[4].c_str(), nullptr, 10);
    r.n_b = std::strtoull(f[5].c_str(), nullptr, 10);
    r.pass = f[6] == "1";
    r.under_powered = f[7] == "1";
    r.metadata = f[8];
    return r;
  }

  std::string human_line() const {
    std::ostringstream os;
    os.precision(6);
    os << (under_powered ? "UNDERPOWERED" : (pass ? "PASS" : "FAIL"));
    os << "  " << name << "  stat=" << statistic;
    if (std::isfinite(threshold)) os << " bound=" << threshold;
    if (std::isfinite(p_value)) os << " p=" << p_value;
    os << " n=" << n_a;
    if (n_b > 0) os << "+" << n_b;
    if (!metadata.empty()) os << "  [" << metadata << "]";
    return os.str();
  }

 private:
  static std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      out += c;
      if (c == '"') out += c;
    }
    out += '"';
    return out;
  }

  // Splits one CSV row with double-quote quoting; quotes inside quoted
  // fields are doubled.
  static std::vector<std::string> split_row(const std::string& row) {
    std::vector<std::string> out;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < row.size(); ++i) {
      char c = row[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < row.size() && row[i + 1] == '"') {
            cur += '"';
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          cur += c;
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  }
};

namespace statsdetail {

// Sup distance between the ECDF of sorted samples and a continuous cdf,
// evaluated on both sides of every jump.
inline double ks_statistic_sorted(const std::vector<double>& x,
                                  const std::function<double(double)>& cdf) {
  double d = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double f = cdf(x[i]);
    d = std::max(d, f - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
  }
  return d;
}

// Sup distance between two ECDFs; tied values advance both sides together,
// so the statistic is valid for identically discretized integer data.
inline double ks_statistic_two(const std::vector<double>& a,
                               const std::vector<double>& b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na -
                              static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace statsdetail

inline TestReport ks_one_sample(std::vector<double> samples,
                                const std::function<double(double)>& cdf,
                                const std::string& name = "ks_one_sample",
                                double threshold =
                                    std::numeric_limits<double>::quiet_NaN()) {
  if (samples.empty()) throw NumericalError("ks_one_sample needs samples");
  std::sort(samples.begin(), samples.end());
  TestReport r;
  r.name = name;
  r.n_a = samples.size();
  r.statistic = statsdetail::ks_statistic_sorted(samples, cdf);
  r.p_value = kolmogorov_sf(std::sqrt(static_cast<double>(samples.size())) *
                            r.statistic);
  r.threshold = threshold;
  r.pass = std::isfinite(threshold) ? r.statistic <= threshold
                                    : r.p_value >= kDefaultPFloor;
  return r;
}

inline TestReport ks_two_sample(std::vector<double> a, std::vector<double> b,
                                const std::string& name = "ks_two_sample",
                                double threshold =
                                    std::numeric_limits<double>::quiet_NaN()) {
  if (a.empty() || b.empty()) throw NumericalError("ks_two_sample needs samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  TestReport r;
  r.name = name;
  r.n_a = a.size();
  r.n_b = b.size();
  r.statistic = statsdetail::ks_statistic_two(a, b);
  double n_eff = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                 static_cast<double>(a.size() + b.size());
  r.p_value = kolmogorov_sf(std::sqrt(n_eff) * r.statistic);
  r.threshold = threshold;
  r.pass = std::isfinite(threshold) ? r.statistic <= threshold
                                    : r.p_value >= kDefaultPFloor;
  return r;
}

// Monte Carlo permutation estimate of the two-sample KS p-value, used to
// cross-check the asymptotic series on small samples.
inline double ks_two_sample_permutation_p(const std::vector<double>& a,
                                          const std::vector<double>& b,
                                          int n_perm, Stream& stream) {
  std::vector<double> pool(a);
  pool.insert(pool.end(), b.begin(), b.end());
  std::vector<double> sa(a), sb(b);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double d_obs = statsdetail::ks_statistic_two(sa, sb);
  int hits = 0;
  for (int p = 0; p < n_perm; ++p) {
    for (std::size_t i = pool.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(
          stream.u01() * static_cast<double>(i + 1));
      if (j > i) j = i;
      std::swap(pool[i], pool[j]);
    }
    sa.assign(pool.begin(), pool.begin() + static_cast<long>(a.size()));
    sb.assign(pool.begin() + static_cast<long>(a.size()), pool.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (statsdetail::ks_statistic_two(sa, sb) >= d_obs - 1e-15) ++hits;
  }
  return static_cast<double>(hits + 1) / static_cast<double>(n_perm + 1);
}

// Total variation between an enumerated pmf and the empirical distribution
// of integer-valued samples, TV = 1/2 sum |p_k - phat_k|. Sample mass that
// falls outside the stored support is compared in aggregate with the pmf's
// recorded mass deficit, so a truncated pmf is not penalized for the tail it
// declared rather than enumerated.
inline TestReport tv_distance(const Pmf& pmf, const std::vector<double>& samples,
                              double threshold,
                              const std::string& name = "tv_distance") {
  if (samples.empty()) throw NumericalError("tv_distance needs samples");
  const double n = static_cast<double>(samples.size());
  std::vector<double> counts(pmf.probs.size(), 0.0);
  double outside = 0.0;
  for (double s : samples) {
    long long k = static_cast<long long>(std::llround(s));
    long long idx = k - pmf.offset;
    if (idx >= 0 && idx < static_cast<long long>(counts.size())) {
      counts[static_cast<std::size_t>(idx)] += 1.0;
    } else {
      outside += 1.0;
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    sum += std::fabs(pmf.probs[i] - counts[i] / n);
  }
  sum += std::fabs(pmf.mass_deficit - outside / n);
  TestReport r;
  r.name = name;
  r.n_a = samples.size();
  r.statistic = 0.5 * sum;
  r.threshold = threshold;
  r.pass = r.statistic <= threshold;
  return r;
}

// Pearson chi-square on binned counts. Bins with expected count below 5 are
// merged inward from both tails before the statistic is formed; if fewer
// than two bins survive, the report is flagged under-powered.
inline TestReport chi_square(const std::vector<double>& observed,
                             const std::vector<double>& expected,
                             const std::string& name = "chi_square",
                             double threshold =
                                 std::numeric_limits<double>::quiet_NaN()) {
  if (observed.size() != expected.size() || observed.empty()) {
    throw NumericalError("chi_square needs matching nonempty bins");
  }
  std::vector<double> obs(observed), exp(expected);
  // Merge the left tail forward.
  std::size_t lo = 0;
  while (lo + 1 < exp.size() && exp[lo] < 5.0) {
    exp[lo + 1] += exp[lo];
    obs[lo + 1] += obs[lo];
    ++lo;
  }
  obs.erase(obs.begin(), obs.begin() + static_cast<long>(lo));
  exp.erase(exp.begin(), exp.begin() + static_cast<long>(lo));
  // Merge the right tail backward.
  std::size_t hi = exp.size();
  while (hi >= 2 && exp[hi - 1] < 5.0) {
    exp[hi - 2] += exp[hi - 1];
    obs[hi - 2] += obs[hi - 1];
    --hi;
  }
  obs.resize(hi);
  exp.resize(hi);

  TestReport r;
  r.name = name;
  double total = 0.0;
  for (double o : observed) total += o;
  r.n_a = static_cast<std::uint64_t>(std::llround(total));
  if (exp.size() < 2 || exp.front() < 5.0) {
    r.under_powered = true;
    r.pass = false;
    return r;
  }
  double x2 = 0.0;
  for (std::size_t i = 0; i < exp.size(); ++i) {
    double d = obs[i] - exp[i];
    x2 += d * d / exp[i];
  }
  r.statistic = x2;
  r.p_value = chi_square_sf(x2, static_cast<double>(exp.size() - 1));
  r.threshold = threshold;
  r.pass = std::isfinite(threshold) ? x2 <= threshold
                                    : r.p_value >= kDefaultPFloor;
  return r;
}

// Compares the first m sample moments against analytic values, each
// studentized by its own sample standard error. The statistic is the worst
// |z|; the default bound of 4 standard errors keeps the false-alarm rate
// negligible across a large test suite.
inline TestReport moment_z(const std::vector<double>& samples,
                           const std::vector<double>& analytic_moments,
                           const std::string& name = "moment_z",
                           double threshold = 4.0) {
  if (analytic_moments.empty()) throw NumericalError("moment_z needs moments");
  TestReport r;
  r.name = name;
  r.n_a = samples.size();
  r.threshold = threshold;
  if (samples.size() < 2) {
    r.under_powered = true;
    r.pass = false;
    return r;
  }
  const double n = static_cast<double>(samples.size());
  double worst = 0.0;
  for (std::size_t j = 0; j < analytic_moments.size(); ++j) {
    double mean = 0.0, sq = 0.0;
    for (double s : samples) {
      double pw = std::pow(s, static_cast<double>(j + 1));
      mean += pw;
      sq += pw * pw;
    }
    mean /= n;
    double var = std::max(0.0, sq / n - mean * mean) * n / (n - 1.0);
    double se = std::sqrt(var / n);
    if (se == 0.0) {
      if (mean != analytic_moments[j]) worst = std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, std::fabs(mean - analytic_moments[j]) / se);
  }
  r.statistic = worst;
  r.pass = worst <= threshold;
  return r;
}

enum class TrendDirection { Increasing, Decreasing };

// Checks strict monotonicity of a short sequence indexed by n-decades, the
// desk-scale rendering of a weak-convergence statement. The band lets single
// steps backtrack by a small amount, but the endpoints must still move
// strictly in the stated direction. The statistic is the worst directed
// step.
inline TestReport trend_test(const std::vector<double>& values,
                             TrendDirection direction, double band = 0.0,
                             const std::string& name = "trend_test") {
  if (values.size() < 3) throw NumericalError("trend_test needs >= 3 values");
  double sign = direction == TrendDirection::Increasing ? 1.0 : -1.0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    worst = std::min(worst, sign * (values[i + 1] - values[i]));
  }
  TestReport r;
  r.name = name;
  r.n_a = values.size();
  r.statistic = worst;
  r.threshold = -band;
  r.pass = worst > -band && sign * (values.back() - values.front()) > 0.0;
  return r;
}

// Spreads integer-valued samples over unit intervals so that a KS test
// against a continuous law is meaningful. The centered form X - 1/2 + U
// preserves the mean; the downward form X - U places the dithered value
// strictly below the integer, preserving stochastic order against upper
// bounds.
inline std::vector<double> dither_centered(const std::vector<double>& x,
                                           Stream& stream) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] - 0.5 + stream.u01();
  }
  return out;
}

inline std::vector<double> dither_down(const std::vector<double>& x,
                                       Stream& stream) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] - stream.u01();
  }
  return out;
}

// Centers and scales by the sample standard deviation, for comparing a
// finite-n sample against a limit law specified up to affine normalization.
inline std::vector<double> studentized(const std::vector<double>& x) {
  if (x.size() < 2) throw NumericalError("studentized needs >= 2 samples");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size() - 1);
  if (!(var > 0.0)) throw NumericalError("studentized needs nonzero variance");
  double sd = std::sqrt(var);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
  return out;
}

}  // namespace occlab
