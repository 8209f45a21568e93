#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "occlab/exact.hpp"
#include "occlab/sim.hpp"
#include "occlab/stats.hpp"

using namespace occlab;

namespace {

std::vector<double> sample_col(const XiModel& m, long long n, std::uint64_t reps,
                               std::uint64_t seed, SimMethod method,
                               const char* name, unsigned mask) {
  ReplicateRequest req(m);
  req.n = n;
  req.reps = reps;
  req.seed = seed;
  req.method = method;
  req.stats = mask;
  return run_replicates(req).col(name);
}

double mean_of(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  return m / static_cast<double>(x.size());
}

double se_of(const std::vector<double>& x) {
  double m = mean_of(x), sq = 0.0;
  for (double v : x) sq += (v - m) * (v - m);
  return std::sqrt(sq / (static_cast<double>(x.size()) - 1.0) /
                   static_cast<double>(x.size()));
}

}  // namespace

TEST_CASE("worked nine-ball compositions", "[sim]") {
  SieveStats a = stats_from_composition({{1, 2, 1, 0, 2, 0, 0, 3}, 9});
  CHECK(a.kstar == 8);
  CHECK(a.k == 5);
  CHECK(a.k0 == 3);
  CHECK(a.k1 == 2);
  CHECK(a.w == 4);
  CHECK(a.z == 3);
  CHECK(a.v == 5);

  SieveStats b = stats_from_composition({{1, 2, 1, 2, 3}, 9});
  CHECK(b.w == 6);
  CHECK(b.v == 0);
  CHECK(b.kstar == 5);

  SieveStats c = stats_from_composition({{0, 1, 2, 1, 2, 3}, 9});
  CHECK(c.w == 1);
  CHECK(c.v == 9);
  CHECK(c.k0 == 1);
}

TEST_CASE("per-realization invariants for both constructions", "[sim]") {
  std::vector<XiModel> models = {XiModel::beta(1, 1), XiModel::beta(2, 3),
                                 XiModel::gem(2), XiModel::logpareto(0.5),
                                 XiModel::logpareto(2), XiModel::example27()};
  for (const XiModel& m : models) {
    for (long long n : {1LL, 2LL, 17LL, 100LL}) {
      for (int rep = 0; rep < 200; ++rep) {
        Stream s1(301, static_cast<std::uint64_t>(rep));
        Stream s2(302, static_cast<std::uint64_t>(rep));
        for (const WeakComposition& comp :
             {simulate_composition(m, n, s1),
              simulate_composition_walkpoints(m, n, s2)}) {
          long long total = 0;
          for (long long c : comp.counts) {
            REQUIRE(c >= 0);
            total += c;
          }
          REQUIRE(total == n);
          REQUIRE(comp.counts.back() > 0);

          SieveStats st = stats_from_composition(comp);
          REQUIRE(st.kstar == static_cast<long long>(comp.counts.size()));
          REQUIRE(st.kstar == st.k + st.k0);
          REQUIRE(st.z >= 1);
          REQUIRE(st.w <= st.kstar + 1);
          REQUIRE((st.v == 0) == (st.w == st.kstar + 1));

          // Independent recount of the derived statistics.
          long long k = 0, k1 = 0, v = 0;
          long long w = st.kstar + 1;
          for (std::size_t j = 0; j < comp.counts.size(); ++j) {
            if (comp.counts[j] > 0) ++k;
            if (comp.counts[j] == 1) ++k1;
            if (comp.counts[j] == 0 &&
                w == st.kstar + 1) {
              w = static_cast<long long>(j) + 1;
            }
            if (w <= static_cast<long long>(j)) v += comp.counts[j];
          }
          REQUIRE(st.k == k);
          REQUIRE(st.k1 == k1);
          REQUIRE(st.w == w);
          REQUIRE(st.v == v);
        }
      }
    }
  }
}

TEST_CASE("empty and invalid inputs", "[sim]") {
  XiModel m = XiModel::beta(1, 1);
  Stream s(1, 0);
  CHECK(simulate_composition(m, 0, s).counts.empty());
  CHECK(simulate_composition_walkpoints(m, 0, s).counts.empty());

  SieveStats st = stats_from_composition({{}, 0});
  CHECK(st.kstar == 0);
  CHECK(st.w == 1);
  CHECK(st.z == 0);
  CHECK(st.v == 0);

  CHECK_THROWS_AS(simulate_composition(m, -1, s), NumericalError);
  CHECK_THROWS_AS(simulate_kstar_fast(m, 0, s), NumericalError);
  CHECK_THROWS_AS(simulate_zn_fast(m, 0, s), NumericalError);
  CHECK_THROWS_AS(simulate_renewal_count(m, -0.5, s), NumericalError);
  CHECK_THROWS_AS(simulate_undershoot(m, 0, s), NumericalError);
  CHECK_THROWS_AS(simulate_poissonized(m, -1.0, s), NumericalError);
}

TEST_CASE("single ball lands geometrically", "[sim]") {
  XiModel b11 = XiModel::beta(1, 1);
  for (SimMethod meth : {SimMethod::Composition, SimMethod::Walkpoints}) {
    auto ks = sample_col(b11, 1, 10000, 9911, meth, "kstar", statfield::kKstar);
    std::vector<double> obs(10, 0.0), expd(10, 0.0);
    for (double v : ks) {
      long long j = static_cast<long long>(v);
      if (j >= 1 && j <= 9) {
        obs[static_cast<std::size_t>(j - 1)] += 1.0;
      } else {
        obs[9] += 1.0;
      }
    }
    for (int j = 1; j <= 9; ++j) {
      expd[static_cast<std::size_t>(j - 1)] = 10000.0 * std::pow(2.0, -j);
    }
    expd[9] = 10000.0 * std::pow(2.0, -9);
    TestReport r = chi_square(obs, expd);
    INFO("method " << static_cast<int>(meth));
    CHECK(r.pass);
  }
}

TEST_CASE("stick-breaking and walk constructions are equidistributed", "[sim]") {
  std::vector<std::pair<std::string, XiModel>> models = {
      {"beta11", XiModel::beta(1, 1)}, {"beta23", XiModel::beta(2, 3)},
      {"gem2", XiModel::gem(2)},       {"lp05", XiModel::logpareto(0.5)},
      {"e27", XiModel::example27()}};
  const char* stats[] = {"kstar", "k", "k0", "z"};
  std::uint64_t seed = 4200;
  for (auto& [mname, m] : models) {
    for (long long n : {10LL, 100LL, 1000LL}) {
      ReplicateRequest a(m), b(m);
      a.n = b.n = n;
      a.reps = b.reps = 10000;
      a.seed = seed++;
      b.seed = seed++;
      a.method = SimMethod::Composition;
      b.method = SimMethod::Walkpoints;
      SampleTable ta = run_replicates(a);
      SampleTable tb = run_replicates(b);
      for (const char* st : stats) {
        TestReport r = ks_two_sample(ta.col(st), tb.col(st));
        INFO(mname << " n=" << n << " stat=" << st << " p=" << r.p_value);
        CHECK(r.p_value >= 1e-3);
      }
    }
  }
}

TEST_CASE("fast last-box index sampler is equidistributed", "[sim]") {
  std::vector<XiModel> models = {XiModel::beta(1, 1), XiModel::beta(2, 3),
                                 XiModel::logpareto(0.5)};
  std::uint64_t seed = 7700;
  for (const XiModel& m : models) {
    for (long long n : {10LL, 1000LL}) {
      auto a = sample_col(m, n, 10000, seed++, SimMethod::Composition, "kstar",
                          statfield::kKstar);
      auto b = sample_col(m, n, 10000, seed++, SimMethod::KstarFast, "kstar", 0);
      TestReport r = ks_two_sample(a, b);
      INFO("n=" << n << " p=" << r.p_value);
      CHECK(r.p_value >= 1e-3);
    }
  }
}

TEST_CASE("fast last-box occupancy sampler matches exact and full paths", "[sim]") {
  XiModel b11 = XiModel::beta(1, 1);
  auto zf = sample_col(b11, 100, 20000, 8801, SimMethod::ZnFast, "z", 0);
  CHECK(tv_distance(zn_pmf(b11, 100), zf, 0.02).pass);

  auto zc = sample_col(b11, 1000, 10000, 8803, SimMethod::Composition, "z",
                       statfield::kZ);
  auto zf2 = sample_col(b11, 1000, 10000, 8804, SimMethod::ZnFast, "z", 0);
  CHECK(ks_two_sample(zc, zf2).p_value >= 1e-3);

  XiModel lp = XiModel::logpareto(0.5);
  auto zc3 = sample_col(lp, 1000, 10000, 8805, SimMethod::Composition, "z",
                        statfield::kZ);
  auto zf3 = sample_col(lp, 1000, 10000, 8806, SimMethod::ZnFast, "z", 0);
  CHECK(ks_two_sample(zc3, zf3).p_value >= 1e-3);
}

TEST_CASE("renewal counter boundary and growth", "[sim]") {
  XiModel b11 = XiModel::beta(1, 1);
  Stream s(5, 0);
  CHECK(simulate_renewal_count(b11, 0.0, s) == 1);

  // Unit-exponential steps make the count at t a shifted Poisson, so the
  // mean at t = 5 is exactly 6.
  std::vector<double> counts(20000);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    Stream st(51, i);
    counts[i] = static_cast<double>(simulate_renewal_count(b11, 5.0, st));
  }
  CHECK(moment_z(counts, {6.0}).pass);

  // Heavy-tailed steps with tail index 1/2: the count grows like t^{1/2}.
  XiModel lp = XiModel::logpareto(0.5);
  std::vector<double> lx, ly;
  for (int e = 4; e <= 14; ++e) {
    double t = std::pow(2.0, e);
    double m2 = 0.0;
    const int reps = 2000;
    for (int i = 0; i < reps; ++i) {
      Stream st(52 + static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(i));
      m2 += static_cast<double>(simulate_renewal_count(lp, t, st));
    }
    lx.push_back(std::log(t));
    ly.push_back(std::log(m2 / reps));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double nn = static_cast<double>(lx.size());
  double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  CHECK(slope == Catch::Approx(0.5).margin(0.05));
}

TEST_CASE("fast sampler handles astronomical ball counts", "[sim]") {
  XiModel b11 = XiModel::beta(1, 1);
  std::vector<double> v(10000);
  for (std::size_t i = 0; i < v.size(); ++i) {
    Stream st(31, i);
    v[i] = static_cast<double>(simulate_kstar_fast(b11, 1000000000000LL, st));
  }
  // Exact mean: harmonic number of n plus one, by the shifted-Poisson count
  // at the exponential maximum.
  double target = std::log(1e12) + 0.57721566490153286 + 1.0;
  double m = mean_of(v), se = se_of(v);
  CHECK(std::fabs(m - target) < 4.0 * se);
  double sd = se * 100.0;
  CHECK(sd > 4.0);
  CHECK(sd < 7.0);
}

TEST_CASE("undershoot sampler reproduces the last-box tail", "[sim]") {
  XiModel b11 = XiModel::beta(1, 1);
  const int reps = 50000;
  double pa = 0.0, pb = 0.0, pc = 0.0;
  for (int i = 0; i < reps; ++i) {
    Stream s1(61, static_cast<std::uint64_t>(i));
    if (stats_from_composition(simulate_composition(b11, 10000, s1)).z > 1) {
      pa += 1.0;
    }
    Stream s2(62, static_cast<std::uint64_t>(i));
    UndershootSample us = simulate_undershoot(b11, 10000, s2, 4);
    if (us.undershoot > us.gaps[0]) pb += 1.0;
    Stream s3(63, static_cast<std::uint64_t>(i));
    if (simulate_zn_fast(b11, 10000, s3) > 1) pc += 1.0;
  }
  pa /= reps;
  pb /= reps;
  pc /= reps;
  double band = 4.0 * std::sqrt(pa * (1.0 - pa) * 2.0 / reps);
  CHECK(std::fabs(pa - pb) < band);
  CHECK(std::fabs(pa - pc) < band);

  Stream sg(64, 0);
  UndershootSample us = simulate_undershoot(b11, 100, sg, 32);
  CHECK(us.gaps.size() == 32);
  CHECK(us.e_max > 0.0);
  CHECK(us.undershoot > 0.0);
  CHECK(us.undershoot <= us.e_max);
  for (std::size_t i = 1; i < us.gaps.size(); ++i) {
    CHECK(us.gaps[i] >= us.gaps[i - 1]);
  }
  // k_cap is clamped by the number of available order statistics.
  Stream sh(65, 0);
  CHECK(simulate_undershoot(b11, 3, sh, 64).gaps.size() == 2);
}

TEST_CASE("poissonized ball counts", "[sim]") {
  XiModel g1 = XiModel::gem(1);
  Stream s(71, 0);
  SieveStats st0 = simulate_poissonized(g1, 0.0, s);
  CHECK(st0.kstar == 0);
  CHECK(st0.w == 1);
  CHECK(st0.z == 0);

  // At a large poissonized horizon the empty-count law is already within a
  // hair of its geometric(1/2) limit.
  const int reps = 10000;
  std::vector<double> k0s(reps);
  for (int i = 0; i < reps; ++i) {
    Stream st(72, static_cast<std::uint64_t>(i));
    k0s[static_cast<std::size_t>(i)] =
        static_cast<double>(simulate_poissonized(g1, 1e4, st).k0);
  }
  Pmf geo;
  geo.offset = 0;
  geo.probs.resize(42);
  for (int i = 0; i <= 41; ++i) {
    geo.probs[static_cast<std::size_t>(i)] = std::pow(2.0, -(i + 1));
  }
  geo.mass_deficit = std::pow(2.0, -42.0);
  CHECK(tv_distance(geo, k0s, 0.02).pass);

  // Depoissonization: the mixed count at horizon n behaves like fixed n.
  XiModel b11 = XiModel::beta(1, 1);
  std::vector<double> pk0(reps);
  for (int i = 0; i < reps; ++i) {
    Stream st(73, static_cast<std::uint64_t>(i));
    pk0[static_cast<std::size_t>(i)] =
        static_cast<double>(simulate_poissonized(b11, 1e4, st).k0);
  }
  auto fk0 = sample_col(b11, 10000, reps, 74, SimMethod::Composition, "k0",
                        statfield::kK0);
  CHECK(ks_two_sample(pk0, fk0).p_value >= 1e-3);
}

TEST_CASE("replicate batches are deterministic for any worker count", "[sim]") {
  XiModel b23 = XiModel::beta(2, 3);
  std::string csv[3];
  const int wk[3] = {1, 3, 8};
  for (int i = 0; i < 3; ++i) {
    ReplicateRequest req(b23);
    req.n = 100;
    req.reps = 4000;
    req.seed = 99;
    req.stats = statfield::kAllStats | statfield::kNlogn;
    req.workers = wk[i];
    std::ostringstream os;
    SampleTable t = run_replicates(req);
    CHECK(t.completed == 4000);
    CHECK_FALSE(t.truncated);
    t.write_csv(os);
    csv[static_cast<std::size_t>(i)] = os.str();
  }
  CHECK(csv[0] == csv[1]);
  CHECK(csv[0] == csv[2]);

  // Header names the selected statistics in canonical order.
  CHECK(csv[0].substr(0, csv[0].find('\n')) == "kstar,k,k0,k1,w,z,v,nlogn");

  ReplicateRequest one(b23);
  one.n = 10;
  one.reps = 1;
  one.seed = 99;
  SampleTable t1 = run_replicates(one);
  CHECK(t1.completed == 1);
  CHECK(t1.col("kstar").size() == 1);
  CHECK_THROWS_AS(t1.col("nope"), NumericalError);

  ReplicateRequest fast(b23);
  fast.n = 10;
  fast.reps = 2;
  fast.method = SimMethod::KstarFast;
  CHECK(run_replicates(fast).names == std::vector<std::string>{"kstar"});
  ReplicateRequest ren(b23);
  ren.horizon = 1.0;
  ren.reps = 2;
  ren.method = SimMethod::Renewal;
  CHECK(run_replicates(ren).names == std::vector<std::string>{"count"});
}

TEST_CASE("replicate failures truncate to a clean prefix", "[sim]") {
  XiModel poison = XiModel::custom(
      [](double u) -> double {
        if (u < 0.02) throw std::runtime_error("injected failure");
        return 0.5;
      },
      "poisoned");
  ReplicateRequest req(poison);
  req.n = 30;
  req.reps = 200;
  req.seed = 1234;
  req.stats = statfield::kKstar;
  req.workers = 4;
  SampleTable a = run_replicates(req);
  CHECK(a.truncated);
  CHECK(a.completed < 200);
  CHECK(a.failure == "injected failure");
  CHECK(a.col("kstar").size() == a.completed);

  SampleTable b = run_replicates(req);
  CHECK(b.completed == a.completed);
  req.workers = 1;
  SampleTable c = run_replicates(req);
  CHECK(c.completed == a.completed);
}

TEST_CASE("replicate means match the exact engine", "[sim]") {
  XiModel b11 = XiModel::beta(1, 1);
  auto k0c = sample_col(b11, 100, 100000, 81, SimMethod::Composition, "k0",
                        statfield::kK0);
  double target = e_k0_dp(b11, 100);
  CHECK(std::fabs(mean_of(k0c) - target) < 4.0 * se_of(k0c));

  auto ksc = sample_col(b11, 1000, 100000, 82, SimMethod::Composition, "kstar",
                        statfield::kKstar);
  double exact_mean = kstar_pmf(b11, 1000).mean();
  CHECK(std::fabs(mean_of(ksc) - exact_mean) < 4.0 * se_of(ksc));

  // At n = 10^4 the exact mean has the closed harmonic form.
  double hn = 0.0;
  for (int i = 1; i <= 10000; ++i) hn += 1.0 / i;
  auto ks4 = sample_col(b11, 10000, 100000, 83, SimMethod::Composition, "kstar",
                        statfield::kKstar);
  CHECK(std::fabs(mean_of(ks4) - (hn + 1.0)) < 4.0 * se_of(ks4));

  // The ride-along renewal column at t = log n has mean log n + 1.
  auto nl = sample_col(b11, 100, 20000, 84, SimMethod::Composition, "nlogn",
                       statfield::kNlogn);
  CHECK(moment_z(nl, {std::log(100.0) + 1.0}).pass);
}

TEST_CASE("removing one ball is consistent with one fewer ball", "[sim]") {
  XiModel b11 = XiModel::beta(1, 1);
  const int reps = 10000;
  std::vector<std::vector<double>> rem(6), dir(6);
  for (int i = 0; i < reps; ++i) {
    Stream s1(91, static_cast<std::uint64_t>(i));
    WeakComposition c = simulate_composition(b11, 10, s1);
    long long pick = static_cast<long long>(s1.u01() * 10.0);
    if (pick > 9) pick = 9;
    long long cum = 0;
    for (std::size_t j = 0; j < c.counts.size(); ++j) {
      cum += c.counts[j];
      if (pick < cum) {
        c.counts[j] -= 1;
        break;
      }
    }
    while (!c.counts.empty() && c.counts.back() == 0) c.counts.pop_back();
    c.n = 9;
    SieveStats st = stats_from_composition(c);
    const double vals[6] = {
        static_cast<double>(st.kstar), static_cast<double>(st.k),
        static_cast<double>(st.k0),    static_cast<double>(st.z),
        static_cast<double>(st.w),     static_cast<double>(st.v)};
    for (int q = 0; q < 6; ++q) rem[static_cast<std::size_t>(q)].push_back(vals[q]);

    Stream s2(92, static_cast<std::uint64_t>(i));
    SieveStats sd = stats_from_composition(simulate_composition(b11, 9, s2));
    const double vals2[6] = {
        static_cast<double>(sd.kstar), static_cast<double>(sd.k),
        static_cast<double>(sd.k0),    static_cast<double>(sd.z),
        static_cast<double>(sd.w),     static_cast<double>(sd.v)};
    for (int q = 0; q < 6; ++q) dir[static_cast<std::size_t>(q)].push_back(vals2[q]);
  }
  const char* nm[6] = {"kstar", "k", "k0", "z", "w", "v"};
  for (int q = 0; q < 6; ++q) {
    TestReport r = ks_two_sample(rem[static_cast<std::size_t>(q)],
                                 dir[static_cast<std::size_t>(q)]);
    INFO(nm[q] << " p=" << r.p_value);
    CHECK(r.p_value >= 1e-3);
  }
}

TEST_CASE("thinning is multinomial for a constant capture fraction", "[sim]") {
  XiModel c6 = XiModel::custom([](double) { return 0.6; }, "const06");
  const int reps = 10000;

  // Two balls: full joint law over the pair of landing boxes.
  std::map<std::pair<long long, long long>, long long> cat;
  for (int i = 0; i < reps; ++i) {
    Stream s(95, static_cast<std::uint64_t>(i));
    WeakComposition c = simulate_composition(c6, 2, s);
    long long first = 0;
    for (std::size_t j = 0; j < c.counts.size(); ++j) {
      if (c.counts[j] > 0) {
        first = static_cast<long long>(j) + 1;
        break;
      }
    }
    cat[{first, static_cast<long long>(c.counts.size())}] += 1;
  }
  auto pbox = [](long long j) {
    return 0.4 * std::pow(0.6, static_cast<double>(j - 1));
  };
  std::vector<double> obs, expd;
  double tailp = 1.0;
  long long tailobs = reps;
  for (long long i = 1; i <= 6; ++i) {
    for (long long j = i; j <= 6; ++j) {
      double p = i == j ? pbox(i) * pbox(i) : 2.0 * pbox(i) * pbox(j);
      obs.push_back(static_cast<double>(cat[{i, j}]));
      expd.push_back(p * reps);
      tailp -= p;
      tailobs -= cat[{i, j}];
    }
  }
  obs.push_back(static_cast<double>(tailobs));
  expd.push_back(tailp * reps);
  CHECK(chi_square(obs, expd).pass);

  // Fifty balls: the first box count is Binomial(50, 0.4) exactly.
  std::vector<double> b1(51, 0.0), e1(51, 0.0);
  for (int i = 0; i < reps; ++i) {
    Stream s(96, static_cast<std::uint64_t>(i));
    WeakComposition c = simulate_composition(c6, 50, s);
    b1[static_cast<std::size_t>(c.counts[0])] += 1.0;
  }
  for (int k = 0; k <= 50; ++k) {
    e1[static_cast<std::size_t>(k)] =
        reps * std::exp(log_comb(50, k) + k * std::log(0.4) +
                        (50 - k) * std::log(0.6));
  }
  CHECK(chi_square(b1, e1).pass);
}
