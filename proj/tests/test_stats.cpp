#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "occlab/rng.hpp"
#include "occlab/stats.hpp"

using namespace occlab;

TEST_CASE("test reports round trip through csv", "[stats]") {
  TestReport r;
  r.name = "ks \"two\" sample, pooled";
  r.statistic = 0.12345678901234567;
  r.threshold = 0.05;
  r.p_value = std::numeric_limits<double>::quiet_NaN();
  r.n_a = 1000;
  r.n_b = 2000;
  r.pass = true;
  r.under_powered = false;
  r.metadata = "model=beta(1,1),n=100,reps=1000,seed=7";

  TestReport back = TestReport::from_csv_row(r.csv_row());
  CHECK(back.name == r.name);
  CHECK(back.statistic == r.statistic);
  CHECK(back.threshold == r.threshold);
  CHECK(std::isnan(back.p_value));
  CHECK(back.n_a == r.n_a);
  CHECK(back.n_b == r.n_b);
  CHECK(back.pass == r.pass);
  CHECK(back.under_powered == r.under_powered);
  CHECK(back.metadata == r.metadata);
  CHECK(TestReport::csv_header() ==
        "name,statistic,threshold,p_value,n_a,n_b,pass,under_powered,metadata");
  CHECK(r.human_line().find("PASS") == 0);
}

TEST_CASE("two-sample ks basics", "[stats]") {
  std::vector<double> a = {0.1, 0.4, 0.7};
  TestReport same = ks_two_sample(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 1.0);
  CHECK(same.pass);

  std::vector<double> lo = {0.0, 1.0, 2.0};
  std::vector<double> hi = {10.0, 11.0, 12.0};
  CHECK(ks_two_sample(lo, hi).statistic == 1.0);

  // Tied integer data: ecdfs advance together at shared values.
  std::vector<double> x = {1, 1, 2, 3};
  std::vector<double> y = {1, 2, 2, 3};
  CHECK(ks_two_sample(x, y).statistic == Catch::Approx(0.25).margin(1e-15));

  CHECK_THROWS_AS(ks_two_sample({}, a), NumericalError);
}

TEST_CASE("one-sample ks against a continuous cdf", "[stats]") {
  auto unit = [](double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); };

  // Degenerate sample: the ecdf jumps to 1 at the atom, so the statistic is
  // the larger of the cdf value and its complement.
  std::vector<double> atom(10, 0.3);
  TestReport deg = ks_one_sample(atom, unit);
  CHECK(deg.statistic == Catch::Approx(0.7).margin(1e-15));
  CHECK(deg.statistic >= 0.5);
  CHECK_FALSE(deg.pass);

  // Seeded self-test pinned as a regression: draws from the tested cdf.
  Stream s(2024, 0);
  std::vector<double> u(10000);
  for (double& v : u) v = s.u01();
  TestReport self = ks_one_sample(u, unit);
  CHECK(self.statistic == Catch::Approx(0.012341990961247218).epsilon(1e-12));
  CHECK(self.p_value == Catch::Approx(0.095040231687518378).epsilon(1e-12));
  CHECK(self.pass);

  // Explicit threshold overrides the p-value rule.
  TestReport tight = ks_one_sample(u, unit, "tight", 0.001);
  CHECK_FALSE(tight.pass);
}

TEST_CASE("asymptotic p matches a permutation estimate", "[stats]") {
  Stream sa(7, 0), sb(7, 1), sp(7, 2);
  std::vector<double> a(50), b(50);
  for (double& v : a) v = sa.u01();
  for (double& v : b) v = sb.u01() + 0.15;

  TestReport r = ks_two_sample(a, b);
  double perm = ks_two_sample_permutation_p(a, b, 10000, sp);
  CHECK(r.statistic == Catch::Approx(0.3).margin(1e-12));
  CHECK(r.p_value == Catch::Approx(0.022217962616525089).epsilon(1e-12));
  CHECK(perm == Catch::Approx(0.022497750224977502).epsilon(1e-12));
  CHECK(std::fabs(r.p_value - perm) < 0.02);
}

TEST_CASE("total variation with deficit lumping", "[stats]") {
  Pmf half;
  half.offset = 0;
  half.probs = {0.5, 0.5};
  half.mass_deficit = 0.0;
  std::vector<double> samples = {0, 0, 0, 1};
  CHECK(tv_distance(half, samples, 0.3).statistic ==
        Catch::Approx(0.25).margin(1e-15));
  CHECK(tv_distance(half, samples, 0.3).pass);
  CHECK_FALSE(tv_distance(half, samples, 0.2).pass);

  // Mass outside the stored support is compared against the deficit in
  // aggregate, so a declared tail is not double counted.
  Pmf trunc;
  trunc.offset = 0;
  trunc.probs = {0.5, 0.3};
  trunc.mass_deficit = 0.2;
  std::vector<double> wide = {0, 0, 1, 5};
  CHECK(tv_distance(trunc, wide, 0.1).statistic ==
        Catch::Approx(0.05).margin(1e-15));
}

TEST_CASE("chi-square merges sparse tails", "[stats]") {
  // Sparse end bins fold inward before the statistic forms; here the merged
  // tables agree exactly.
  TestReport merged = chi_square({2, 5, 6, 1}, {1, 6, 6, 1});
  CHECK(merged.statistic == Catch::Approx(0.0).margin(1e-15));
  CHECK(merged.p_value == 1.0);
  CHECK(merged.pass);

  TestReport off = chi_square({30, 70}, {50, 50});
  CHECK(off.statistic == Catch::Approx(16.0).margin(1e-12));
  CHECK(off.p_value == Catch::Approx(6.3342483666239849e-05).epsilon(1e-9));
  CHECK_FALSE(off.pass);

  TestReport weak = chi_square({2, 2}, {2, 2});
  CHECK(weak.under_powered);
  CHECK_FALSE(weak.pass);

  CHECK_THROWS_AS(chi_square({1.0}, {1.0, 2.0}), NumericalError);
}

TEST_CASE("moment z-scores", "[stats]") {
  std::vector<double> x = {1, 2, 3, 4, 5};
  TestReport exactmatch = moment_z(x, {3.0, 11.0});
  CHECK(exactmatch.statistic == Catch::Approx(0.0).margin(1e-12));
  CHECK(exactmatch.pass);

  // First moment off by 0.5 with sample se sqrt(2.5/5): |z| = 1/sqrt(2).
  TestReport shifted = moment_z(x, {3.5, 11.0});
  CHECK(shifted.statistic ==
        Catch::Approx(0.70710678118654752).epsilon(1e-12));
  CHECK(shifted.pass);
  CHECK_FALSE(moment_z(x, {3.5}, "tight", 0.5).pass);

  TestReport small = moment_z({1.0}, {1.0});
  CHECK(small.under_powered);
}

TEST_CASE("trend tests over decades", "[stats]") {
  CHECK(trend_test({1, 2, 3}, TrendDirection::Increasing).pass);
  CHECK(trend_test({3, 2, 1}, TrendDirection::Decreasing).pass);
  CHECK_FALSE(trend_test({1, 1, 1}, TrendDirection::Increasing).pass);
  CHECK_FALSE(trend_test({1, 1, 1}, TrendDirection::Decreasing).pass);
  CHECK_FALSE(trend_test({3, 2, 1}, TrendDirection::Increasing).pass);

  // The band forgives a small counter-step but the endpoints must still
  // move strictly in the stated direction.
  CHECK(trend_test({1.0, 2.0, 1.99}, TrendDirection::Increasing, 0.02).pass);
  CHECK_FALSE(trend_test({1.0, 2.0, 1.99}, TrendDirection::Increasing, 0.005).pass);

  CHECK_THROWS_AS(trend_test({1, 2}, TrendDirection::Increasing), NumericalError);
}

TEST_CASE("dither and studentize helpers", "[stats]") {
  Stream s(11, 0);
  std::vector<double> x = {3, 3, 3, 7};
  std::vector<double> c = dither_centered(x, s);
  std::vector<double> d = dither_down(x, s);
  REQUIRE(c.size() == 4);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(c[i] > 2.5);
    CHECK(c[i] < 3.5);
    CHECK(d[i] > 2.0);
    CHECK(d[i] < 3.0);
  }
  CHECK(c[3] > 6.5);
  CHECK(d[3] < 7.0);

  std::vector<double> z = studentized({1.0, 2.0, 3.0});
  CHECK(z[0] == Catch::Approx(-1.0).margin(1e-15));
  CHECK(z[1] == Catch::Approx(0.0).margin(1e-15));
  CHECK(z[2] == Catch::Approx(1.0).margin(1e-15));
  CHECK_THROWS_AS(studentized({2.0, 2.0, 2.0}), NumericalError);
}
