#pragma once

// Alternating binomial sums in arbitrary precision. These routes suffer
// catastrophic cancellation in double (binomial weights reach 2^n while the
// result stays in [0,1]), so they run on mpfr floats with a working precision
// that starts at max(256, 4n) bits and doubles while the result is
// implausible, failing hard once the next step would exceed max(1024, 4n).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include "occlab/model.hpp"
#include "occlab/special.hpp"

namespace occlab {

using mp_float = boost::multiprecision::mpfr_float;

namespace mpdetail {

inline unsigned digits10_for_bits(int bits) {
  return static_cast<unsigned>(std::ceil(bits * 0.30103)) + 2;
}

// Scoped override of the mpfr working precision.
class PrecisionGuard {
 public:
  explicit PrecisionGuard(int bits) : saved_(mp_float::default_precision()) {
    mp_float::default_precision(digits10_for_bits(bits));
  }
  ~PrecisionGuard() { mp_float::default_precision(saved_); }
  PrecisionGuard(const PrecisionGuard&) = delete;
  PrecisionGuard& operator=(const PrecisionGuard&) = delete;

 private:
  unsigned saved_;
};

// Moment tables E xibar^k and E xi^k, k = 0..n, at a given precision.
struct MomentTables {
  int bits = 0;
  std::vector<mp_float> exibar;
  std::vector<mp_float> exi;
};

// Double-exponential node set on (0,1) for u = (1 + tanh((pi/2) sinh t)) / 2.
// Nodes come in symmetric pairs around 1/2; only the distance to the nearer
// endpoint is stored, which stays exact far below the working epsilon of 1.
// Boost's tanh_sinh is avoided because it takes logs of numeric_limits
// boundaries that are unset for variable precision mpfr floats.
struct DeNode {
  mp_float edge;    // distance from the nearer endpoint, in (0, 1/2)
  mp_float weight;  // (pi/4) cosh(t) sech^2((pi/2) sinh t), no step factor
};

struct DeTable {
  int bits = 0;
  mp_float center_weight;  // weight of the single t = 0 node at u = 1/2
  // levels[0] holds t = 1, 2, ...; levels[L] holds odd multiples of 2^-L.
  std::vector<std::vector<DeNode>> levels;
};

inline void de_fill_level(DeTable& t, int level, double t_max) {
  auto& nodes = t.levels[static_cast<size_t>(level)];
  double h = std::ldexp(1.0, -level);
  mp_float half_pi = boost::math::constants::half_pi<mp_float>();
  int j = 1;
  int step = (level == 0) ? 1 : 2;
  for (; j * h <= t_max; j += step) {
    mp_float tj = mp_float(j) * h;
    mp_float y = half_pi * sinh(tj);
    mp_float e = exp(-2 * y);
    mp_float edge = e / (1 + e);  // 1 - u on the high side, u on the low side
    mp_float w = half_pi * cosh(tj) * 2 * edge / (1 + e);  // (pi/4) cosh sech^2
    if (w == 0 || edge == 0) break;
    nodes.push_back({std::move(edge), std::move(w)});
  }
}

inline const DeTable& de_table(int bits) {
  static std::map<int, std::unique_ptr<DeTable>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[bits];
  if (!slot) {
    PrecisionGuard guard(bits);
    slot = std::make_unique<DeTable>();
    slot->bits = bits;
    slot->center_weight = boost::math::constants::half_pi<mp_float>() / 2;
    double t_max =
        std::asinh((bits + 64) * 0.6931471805599453 * 2.0 / 3.141592653589793);
    slot->levels.resize(13);
    for (int level = 0; level < 13; ++level) {
      de_fill_level(*slot, level, t_max);
    }
  }
  return *slot;
}

// Progressive tanh-sinh integration of f over (0,1). The integrand must cope
// with arguments that have rounded to exactly 0 or 1; infinities produced
// there feed mpfr exp/expm1, which saturate gracefully.
template <class F>
mp_float integrate_unit(const F& f, int bits) {
  const DeTable& table = de_table(bits);
  mp_float tol = pow(mp_float(2), -(2 * bits) / 3);
  mp_float sum = table.center_weight * f(mp_float(1) / 2);
  mp_float prev = 0;
  for (size_t level = 0; level < table.levels.size(); ++level) {
    for (const DeNode& node : table.levels[level]) {
      sum += node.weight * (f(node.edge) + f(1 - node.edge));
    }
    mp_float estimate = ldexp(sum, -static_cast<int>(level));
    if (level >= 4 && abs(estimate - prev) <= tol * abs(estimate)) {
      return estimate;
    }
    prev = estimate;
  }
  return prev;
}

inline void extend_tables(const XiModel& model, MomentTables& t, int n) {
  int have = static_cast<int>(t.exibar.size()) - 1;
  if (have >= n) return;
  if (t.exibar.empty()) {
    t.exibar.push_back(mp_float(1));
    t.exi.push_back(mp_float(1));
    have = 0;
  }
  switch (model.kind()) {
    case ModelKind::Beta:
    case ModelKind::Gem: {
      mp_float b(model.beta_b()), c(model.beta_c());
      for (int k = have; k < n; ++k) {
        t.exibar.push_back(t.exibar.back() * (c + k) / (b + c + k));
        t.exi.push_back(t.exi.back() * (b + k) / (b + c + k));
      }
      break;
    }
    case ModelKind::LogPareto: {
      mp_float inv_alpha = mp_float(1) / mp_float(model.alpha());
      for (int k = have + 1; k <= n; ++k) {
        t.exibar.push_back(integrate_unit(
            [&](const mp_float& u) {
              mp_float e = 1 - pow(u, -inv_alpha);
              return exp(mp_float(k) * e);
            },
            t.bits));
        t.exi.push_back(integrate_unit(
            [&](const mp_float& u) {
              mp_float e = 1 - pow(u, -inv_alpha);
              return pow(-expm1(e), k);
            },
            t.bits));
      }
      break;
    }
    case ModelKind::Example27: {
      for (int k = have + 1; k <= n; ++k) {
        t.exibar.push_back(integrate_unit(
            [&](const mp_float& u) {
              return pow(-expm1(-u / (1 - u)), k);
            },
            t.bits));
        t.exi.push_back(integrate_unit(
            [&](const mp_float& u) {
              return exp(mp_float(-k) * u / (1 - u));
            },
            t.bits));
      }
      break;
    }
    case ModelKind::Custom: {
      // Custom models only expose double-precision moments; escalation then
      // cannot recover digits and the plausibility check fails hard instead.
      for (int k = have + 1; k <= n; ++k) {
        t.exibar.push_back(mp_float(model.exibar_pow(k)));
        t.exi.push_back(mp_float(model.exi_pow(k)));
      }
      break;
    }
  }
}

inline std::shared_ptr<const MomentTables> moment_tables(const XiModel& model,
                                                         int n, int bits) {
  static std::map<std::pair<std::uint64_t, int>, std::shared_ptr<MomentTables>>
      cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{model.fingerprint(), bits}];
  if (!slot) {
    slot = std::make_shared<MomentTables>();
    slot->bits = bits;
  }
  extend_tables(model, *slot, n);
  return slot;
}

struct EscalationPlan {
  int bits;
  int cap;
  explicit EscalationPlan(int n)
      : bits(std::max(256, 4 * n)), cap(std::max(1024, 4 * n)) {}
  bool escalate() {
    bits *= 2;
    return bits <= cap;
  }
};

}  // namespace mpdetail

// P{K_n* > k} by direct inclusion-exclusion over the first boxes all being
// missed; valid for n <= 200 with escalating precision.
inline double kstar_tail_direct(const XiModel& model, int n, int k) {
  if (n < 1 || n > 200) {
    throw NumericalError("kstar_tail_direct supports 1 <= n <= 200");
  }
  if (k <= 0) return 1.0;
  mpdetail::EscalationPlan plan(n);
  while (true) {
    double result;
    {
      mpdetail::PrecisionGuard guard(plan.bits);
      auto tables = mpdetail::moment_tables(model, n, plan.bits);
      mp_float sum(0), comb(1);
      for (int i = 1; i <= n; ++i) {
        comb = comb * (n - i + 1) / i;
        mp_float term = comb * pow(tables->exibar[static_cast<size_t>(i)], k);
        if (i % 2 == 1) {
          sum += term;
        } else {
          sum -= term;
        }
      }
      result = sum.convert_to<double>();
    }
    if (std::isfinite(result) && result > -1e-9 && result < 1.0 + 1e-9) {
      return std::min(1.0, std::max(0.0, result));
    }
    if (!plan.escalate()) {
      throw NumericalError(
          "kstar_tail_direct: implausible value persists at max precision");
    }
  }
}

// E K_{n,0} by the alternating binomial sum; valid for n <= 200 with
// escalating precision.
inline double e_k0_alt_sum(const XiModel& model, int n) {
  if (n < 1 || n > 200) {
    throw NumericalError("e_k0_alt_sum supports 1 <= n <= 200");
  }
  mpdetail::EscalationPlan plan(n);
  while (true) {
    double result;
    {
      mpdetail::PrecisionGuard guard(plan.bits);
      auto tables = mpdetail::moment_tables(model, n, plan.bits);
      mp_float sum(0), comb(1);
      for (int k = 1; k <= n; ++k) {
        comb = comb * (n - k + 1) / k;
        mp_float term = comb * (1 - tables->exi[static_cast<size_t>(k)]) /
                        (1 - tables->exibar[static_cast<size_t>(k)]);
        if (k % 2 == 1) {
          sum += term;
        } else {
          sum -= term;
        }
      }
      result = sum.convert_to<double>();
    }
    if (std::isfinite(result) && result > -1e-9 && std::abs(result) < 1e9) {
      return std::max(0.0, result);
    }
    if (!plan.escalate()) {
      throw NumericalError(
          "e_k0_alt_sum: implausible value persists at max precision");
    }
  }
}

}  // namespace occlab
