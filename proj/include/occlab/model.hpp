#pragma once

// Sticking-fraction models for the sieve. A model fixes the law of the kept
// fraction xibar on (0,1); the captured fraction is xi = 1 - xibar. Built-in
// families:
//
//   Beta(b, c)      xi ~ beta(b, c), xibar ~ beta(c, b); closed moments.
//   GEM(theta)      canonicalized Beta(1, theta).
//   LogPareto(a)    P{xibar <= x} = (1 - log x)^{-a}; quantile closed.
//   Example27       P{xibar <= x} = -log(1-x) / (1 - log(1-x)); mu finite,
//                   nu infinite, sigma^2 finite.
//   Custom          user-supplied quantile, optional limit-case hint, and a
//                   non-lattice attestation flag.
//
// Beta-kind moments come from the closed product form; other kinds integrate
// against the quantile in u-space (the density never appears, so endpoint
// singularities of the density cause no trouble). Moment tables are cached
// per model and extended on demand under a mutex, so models are shareable
// across threads.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "occlab/quadrature.hpp"
#include "occlab/rng.hpp"
#include "occlab/special.hpp"

namespace occlab {

enum class ModelKind { Beta, Gem, LogPareto, Example27, Custom };
enum class LimitCase { A, B, C, D, E, Unsupported };

struct CaseInfo {
  LimitCase tag = LimitCase::Unsupported;
  double alpha = 0.0;  // tail index when tag is B, C, D, or E
};

inline const char* limit_case_name(LimitCase c) {
  switch (c) {
    case LimitCase::A: return "a";
    case LimitCase::B: return "b";
    case LimitCase::C: return "c";
    case LimitCase::D: return "d";
    case LimitCase::E: return "e";
    default: return "unsupported";
  }
}

namespace detail {

struct ModelImpl {
  ModelKind kind = ModelKind::Beta;
  double b = 1.0;      // Beta/Gem: xi ~ beta(b, c)
  double c = 1.0;
  double alpha = 0.0;  // LogPareto tail index
  std::function<double(double)> custom_quantile;
  std::optional<CaseInfo> custom_case;
  bool custom_nonlattice = false;
  std::string name;

  mutable std::mutex moment_mu;
  mutable std::vector<double> exibar;  // exibar[k] = E xibar^k, exibar[0] = 1
  mutable std::vector<double> exi;     // exi[k] = E xi^k
  mutable std::optional<double> mu_cache, nu_cache, sigma2_cache;
};

}  // namespace detail

class XiModel {
 public:
  XiModel() : impl_(std::make_shared<detail::ModelImpl>()) {}

  ModelKind kind() const { return impl_->kind; }
  const std::string& name() const { return impl_->name; }
  double beta_b() const { return impl_->b; }
  double beta_c() const { return impl_->c; }
  double alpha() const { return impl_->alpha; }
  bool beta_kind() const {
    return impl_->kind == ModelKind::Beta || impl_->kind == ModelKind::Gem;
  }

  std::uint64_t fingerprint() const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(impl_->kind) + 0x51ed2701);
    auto fold = [&h](double v) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      h = mix64(h ^ (bits + kGolden));
    };
    fold(impl_->b);
    fold(impl_->c);
    fold(impl_->alpha);
    if (impl_->kind == ModelKind::Custom) {
      for (char ch : impl_->name) h = mix64(h ^ static_cast<std::uint64_t>(ch));
    }
    return h;
  }

  // Quantile of xibar at u in (0,1).
  double quantile_xibar(double u) const {
    switch (impl_->kind) {
      case ModelKind::Beta:
      case ModelKind::Gem:
        return beta_quantile(u, impl_->c, impl_->b);
      case ModelKind::LogPareto:
        return std::exp(1.0 - std::pow(u, -1.0 / impl_->alpha));
      case ModelKind::Example27:
        // u = t/(1+t) with t = -log(1-x), hence x = 1 - exp(-u/(1-u)).
        return -std::expm1(-u / (1.0 - u));
      case ModelKind::Custom:
        return impl_->custom_quantile(u);
    }
    return 0.0;
  }

  // xi evaluated at the same uniform, computed to avoid cancellation where a
  // stable closed form exists.
  double xi_of_u(double u) const {
    switch (impl_->kind) {
      case ModelKind::LogPareto:
        return -std::expm1(1.0 - std::pow(u, -1.0 / impl_->alpha));
      case ModelKind::Example27:
        return std::exp(-u / (1.0 - u));
      default:
        return 1.0 - quantile_xibar(u);
    }
  }

  double cdf_xibar(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    switch (impl_->kind) {
      case ModelKind::Beta:
      case ModelKind::Gem:
        return beta_cdf(x, impl_->c, impl_->b);
      case ModelKind::LogPareto:
        return std::pow(1.0 - std::log(x), -impl_->alpha);
      case ModelKind::Example27: {
        double t = -std::log1p(-x);
        return t / (1.0 + t);
      }
      case ModelKind::Custom: {
        // Monotone bisection against the quantile.
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 80; ++i) {
          double mid = 0.5 * (lo + hi);
          if (impl_->custom_quantile(mid) <= x) lo = mid; else hi = mid;
        }
        return 0.5 * (lo + hi);
      }
    }
    return 0.0;
  }

  double sample_xibar(Stream& s) const {
    if (beta_kind()) {
      double x = s.gamma(impl_->c);
      double y = s.gamma(impl_->b);
      return x / (x + y);
    }
    return quantile_xibar(s.u01());
  }

  // E xibar^k, cached.
  double exibar_pow(int k) const { return moment(k, /*of_xi=*/false); }
  // E xi^k, cached.
  double exi_pow(int k) const { return moment(k, /*of_xi=*/true); }

  double mu() const {
    std::lock_guard<std::mutex> lock(impl_->moment_mu);
    if (!impl_->mu_cache) impl_->mu_cache = compute_mu();
    return *impl_->mu_cache;
  }

  double nu() const {
    std::lock_guard<std::mutex> lock(impl_->moment_mu);
    if (!impl_->nu_cache) impl_->nu_cache = compute_nu();
    return *impl_->nu_cache;
  }

  double sigma2() const {
    std::lock_guard<std::mutex> lock(impl_->moment_mu);
    if (!impl_->sigma2_cache) impl_->sigma2_cache = compute_sigma2();
    return *impl_->sigma2_cache;
  }

  CaseInfo classify_case() const {
    switch (impl_->kind) {
      case ModelKind::Beta:
      case ModelKind::Gem:
      case ModelKind::Example27:
        return {LimitCase::A, 0.0};
      case ModelKind::LogPareto: {
        double a = impl_->alpha;
        if (a > 2.0) return {LimitCase::A, a};
        if (a == 2.0) return {LimitCase::B, a};
        if (a > 1.0) return {LimitCase::C, a};
        if (a == 1.0) return {LimitCase::D, a};
        return {LimitCase::E, a};
      }
      case ModelKind::Custom:
        if (impl_->custom_case) return *impl_->custom_case;
        return {LimitCase::Unsupported, 0.0};
    }
    return {LimitCase::Unsupported, 0.0};
  }

  bool nonlattice_attested() const {
    if (impl_->kind == ModelKind::Custom) return impl_->custom_nonlattice;
    return true;  // built-in families have continuous step laws
  }

  // Factories -------------------------------------------------------------

  static XiModel beta(double b, double c) {
    if (!(b > 0.0) || !(c > 0.0)) throw NumericalError("beta model needs b, c > 0");
    XiModel m;
    m.impl_->kind = ModelKind::Beta;
    m.impl_->b = b;
    m.impl_->c = c;
    std::ostringstream os;
    os << "beta:" << b << "," << c;
    m.impl_->name = os.str();
    return m;
  }

  static XiModel gem(double theta) {
    if (!(theta > 0.0)) throw NumericalError("gem model needs theta > 0");
    XiModel m;
    m.impl_->kind = ModelKind::Gem;
    m.impl_->b = 1.0;
    m.impl_->c = theta;
    std::ostringstream os;
    os << "gem:" << theta;
    m.impl_->name = os.str();
    return m;
  }

  static XiModel logpareto(double alpha) {
    if (!(alpha > 0.0)) throw NumericalError("logpareto model needs alpha > 0");
    XiModel m;
    m.impl_->kind = ModelKind::LogPareto;
    m.impl_->alpha = alpha;
    std::ostringstream os;
    os << "logpareto:" << alpha;
    m.impl_->name = os.str();
    return m;
  }

  static XiModel example27() {
    XiModel m;
    m.impl_->kind = ModelKind::Example27;
    m.impl_->name = "example27";
    return m;
  }

  static XiModel custom(std::function<double(double)> quantile, std::string name,
                        std::optional<CaseInfo> case_hint = std::nullopt,
                        bool nonlattice = false) {
    XiModel m;
    m.impl_->kind = ModelKind::Custom;
    m.impl_->custom_quantile = std::move(quantile);
    m.impl_->custom_case = case_hint;
    m.impl_->custom_nonlattice = nonlattice;
    m.impl_->name = std::move(name);
    return m;
  }

 private:
  double moment(int k, bool of_xi) const {
    if (k <= 0) return 1.0;
    std::lock_guard<std::mutex> lock(impl_->moment_mu);
    auto& tab = of_xi ? impl_->exi : impl_->exibar;
    if (tab.empty()) tab.push_back(1.0);
    while (static_cast<int>(tab.size()) <= k) {
      int j = static_cast<int>(tab.size());
      tab.push_back(compute_moment(j, of_xi, tab[static_cast<size_t>(j - 1)]));
    }
    return tab[static_cast<size_t>(k)];
  }

  double compute_moment(int k, bool of_xi, double prev) const {
    if (beta_kind()) {
      // xibar ~ beta(c, b): E xibar^k = prod (c+t)/(b+c+t);
      // xi ~ beta(b, c):    E xi^k    = prod (b+t)/(b+c+t).
      double num = of_xi ? impl_->b : impl_->c;
      return prev * (num + (k - 1)) / (impl_->b + impl_->c + (k - 1));
    }
    auto f = [this, k, of_xi](double u) {
      double base = of_xi ? xi_of_u(u) : quantile_xibar(u);
      if (base <= 0.0) return 0.0;
      return std::exp(static_cast<double>(k) * std::log(base));
    };
    return integrate_adaptive(f, 0.0, 1.0, 1e-13, 4000);
  }

  double compute_mu() const {
    switch (impl_->kind) {
      case ModelKind::Beta:
      case ModelKind::Gem:
        return digamma(impl_->c + impl_->b) - digamma(impl_->c);
      case ModelKind::LogPareto:
        return impl_->alpha > 1.0 ? 1.0 / (impl_->alpha - 1.0)
                                  : std::numeric_limits<double>::infinity();
      case ModelKind::Example27:
      case ModelKind::Custom: {
        // E(-log xibar) integrated against the quantile.
        double err = 0.0;
        auto f = [this](double u) {
          double q = quantile_xibar(u);
          return q > 0.0 ? -std::log(q) : 744.0;
        };
        double v = integrate_adaptive(f, 0.0, 1.0, 1e-11, 4000, &err);
        if (!std::isfinite(v) || err > 1e-5 * std::max(1.0, std::abs(v)))
          return std::numeric_limits<double>::infinity();
        return v;
      }
    }
    return std::numeric_limits<double>::infinity();
  }

  double compute_nu() const {
    switch (impl_->kind) {
      case ModelKind::Beta:
      case ModelKind::Gem:
        return digamma(impl_->c + impl_->b) - digamma(impl_->b);
      case ModelKind::Example27:
        return std::numeric_limits<double>::infinity();
      case ModelKind::LogPareto: {
        // nu = int_0^infty P{-log xi > y} dy = int_0^infty (1 - F(1-e^{-y})) dy,
        // finite for every alpha > 0.
        auto f = [this](double y) { return 1.0 - cdf_xibar(-std::expm1(-y)); };
        return integrate_adaptive(f, 0.0, std::numeric_limits<double>::infinity(),
                                  1e-12, 2000);
      }
      case ModelKind::Custom: {
        double err = 0.0;
        auto f = [this](double u) {
          double x = xi_of_u(u);
          return x > 0.0 ? -std::log(x) : 744.0;
        };
        double v = integrate_adaptive(f, 0.0, 1.0, 1e-11, 4000, &err);
        if (!std::isfinite(v) || err > 1e-5 * std::max(1.0, std::abs(v)))
          return std::numeric_limits<double>::infinity();
        return v;
      }
    }
    return std::numeric_limits<double>::infinity();
  }

  double compute_sigma2() const {
    switch (impl_->kind) {
      case ModelKind::Beta:
      case ModelKind::Gem:
        return trigamma(impl_->c) - trigamma(impl_->c + impl_->b);
      case ModelKind::LogPareto: {
        double a = impl_->alpha;
        if (a > 2.0) return a / ((a - 1.0) * (a - 1.0) * (a - 2.0));
        return std::numeric_limits<double>::infinity();
      }
      case ModelKind::Example27:
      case ModelKind::Custom: {
        double m = mu_nolock();
        if (!std::isfinite(m)) return std::numeric_limits<double>::infinity();
        double err = 0.0;
        auto f = [this](double u) {
          double q = quantile_xibar(u);
          double t = q > 0.0 ? -std::log(q) : 744.0;
          return t * t;
        };
        double v = integrate_adaptive(f, 0.0, 1.0, 1e-11, 4000, &err);
        if (!std::isfinite(v) || err > 1e-5 * std::max(1.0, std::abs(v)))
          return std::numeric_limits<double>::infinity();
        return v - m * m;
      }
    }
    return std::numeric_limits<double>::infinity();
  }

  double mu_nolock() const {
    if (!impl_->mu_cache) impl_->mu_cache = compute_mu();
    return *impl_->mu_cache;
  }

  std::shared_ptr<detail::ModelImpl> impl_;
};

// Parses the CLI model grammar: beta:<b>,<c> | gem:<theta> | logpareto:<alpha>
// | example27. Returns nullopt on malformed input.
inline std::optional<XiModel> parse_model(const std::string& spec) {
  auto parse_double = [](const std::string& s, double& out) {
    try {
      size_t pos = 0;
      out = std::stod(s, &pos);
      return pos == s.size() && std::isfinite(out);
    } catch (...) {
      return false;
    }
  };
  if (spec == "example27") return XiModel::example27();
  auto colon = spec.find(':');
  if (colon == std::string::npos) return std::nullopt;
  std::string head = spec.substr(0, colon);
  std::string tail = spec.substr(colon + 1);
  try {
    if (head == "beta") {
      auto comma = tail.find(',');
      if (comma == std::string::npos) return std::nullopt;
      double b = 0, c = 0;
      if (!parse_double(tail.substr(0, comma), b)) return std::nullopt;
      if (!parse_double(tail.substr(comma + 1), c)) return std::nullopt;
      if (b <= 0 || c <= 0) return std::nullopt;
      return XiModel::beta(b, c);
    }
    if (head == "gem") {
      double t = 0;
      if (!parse_double(tail, t) || t <= 0) return std::nullopt;
      return XiModel::gem(t);
    }
    if (head == "logpareto") {
      double a = 0;
      if (!parse_double(tail, a) || a <= 0) return std::nullopt;
      return XiModel::logpareto(a);
    }
  } catch (...) {
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace occlab
