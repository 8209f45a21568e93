#pragma once

// Counter-based pseudo-random streams for reproducible parallel Monte Carlo.
//
// Replicate r of a run with master seed s owns the stream Stream(s, r); draw i
// of that stream is a pure function of (s, r, i). Streams can be rewound to an
// earlier draw index, and results never depend on how replicates are spread
// over worker threads.
//
// All variate generators are exact-distribution samplers: binomial and Poisson
// use inversion for small means and order-statistic (beta / gamma) splitting
// recursions for large ones, never a normal approximation.

#include <cmath>
#include <cstdint>

namespace occlab {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
inline constexpr double kPi = 3.14159265358979323846;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t replicate) noexcept {
    std::uint64_t s = mix64(seed ^ (kGolden * (replicate + 1)));
    state_ = mix64(s + 0xD1B54A32D192ED03ull);
  }

  std::uint64_t counter() const noexcept { return counter_; }
  void set_counter(std::uint64_t c) noexcept { counter_ = c; }

  std::uint64_t next_u64() noexcept { return mix64(state_ + kGolden * (++counter_)); }

  // Uniform on the open interval (0,1); never returns 0 or 1.
  double u01() noexcept { return static_cast<double>((next_u64() >> 11) + 0.5) * 0x1p-53; }

  double exponential() noexcept { return -std::log(u01()); }

  // Box-Muller cosine branch; two uniforms per draw, nothing cached, so the
  // draw count is a fixed function of the call sequence.
  double normal() noexcept {
    double a = u01();
    double b = u01();
    return std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * kPi * b);
  }

  // Marsaglia-Tsang squeeze for shape >= 1, boosted by U^{1/shape} below 1.
  double gamma(double shape) noexcept {
    if (shape < 1.0) {
      double u = u01();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = u01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) noexcept {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

  // Exact binomial: inversion when the mean is small, otherwise split at a
  // median-ish order statistic (Beta draw) and recurse on the smaller problem.
  long long binomial(long long n, double p) noexcept {
    long long acc = 0;
    for (;;) {
      if (n <= 0 || p <= 0.0) return acc;
      if (p >= 1.0) return acc + n;
      if (p > 0.5) {
        // Complement once: X = n - Binomial(n, 1-p).
        return acc + n - binomial(n, 1.0 - p);
      }
      double np = static_cast<double>(n) * p;
      if (np <= 30.0 || n <= 64) return acc + inversion(n, p);
      long long i = n / 2 + 1;
      double v = beta(static_cast<double>(i), static_cast<double>(n - i + 1));
      if (v <= p) {
        acc += i;
        n -= i;
        p = (p - v) / (1.0 - v);
      } else {
        n = i - 1;
        p = p / v;
      }
      if (p < 0.0) p = 0.0;
      if (p > 1.0) p = 1.0;
    }
  }

  // Ahrens-Dieter reduction: trade a gamma draw against the mean until the
  // remaining intensity is small enough for plain inversion.
  long long poisson(double lambda) noexcept {
    long long acc = 0;
    while (lambda > 30.0) {
      long long m = static_cast<long long>(std::floor(7.0 * lambda / 8.0));
      double g = gamma(static_cast<double>(m));
      if (g <= lambda) {
        acc += m;
        lambda -= g;
      } else {
        return acc + binomial(m - 1, lambda / g);
      }
    }
    double floor_p = std::exp(-lambda);
    double prod = u01();
    long long k = 0;
    while (prod > floor_p) {
      prod *= u01();
      ++k;
    }
    return acc + k;
  }

 private:
  long long inversion(long long n, double p) noexcept {
    // Requires p <= 1/2 and n*p <= 30 (or small n); expected cost O(np).
    double q = std::exp(static_cast<double>(n) * std::log1p(-p));
    double u = u01();
    double r = q;
    long long k = 0;
    double ratio = p / (1.0 - p);
    while (u > r && k < n) {
      u -= r;
      ++k;
      r *= ratio * static_cast<double>(n - k + 1) / static_cast<double>(k);
    }
    return k;
  }

  std::uint64_t state_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace occlab
