#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "occlab/exact.hpp"
#include "occlab/model.hpp"
#include "occlab/mp.hpp"

using namespace occlab;

namespace {

// P{K* > k} read off a computed pmf.
double pmf_tail(const Pmf& pmf, int k) {
  double head = 0.0;
  for (int j = 1; j <= k; ++j) head += pmf.at(j);
  return 1.0 - head;
}

}  // namespace

TEST_CASE("direct last-box tails for the uniform model", "[mp]") {
  auto m = XiModel::beta(1.0, 1.0);

  SECTION("single ball closed form") {
    for (int k = 0; k <= 40; ++k) {
      CHECK(std::abs(kstar_tail_direct(m, 1, k) - std::ldexp(1.0, -k)) < 1e-15);
    }
  }

  SECTION("matches the chain recursion at n=30") {
    auto pmf = kstar_pmf(m, 30, 80);
    for (int k = 0; k <= 40; ++k) {
      CHECK(std::abs(kstar_tail_direct(m, 30, k) - pmf_tail(pmf, k)) < 1e-9);
    }
  }
}

TEST_CASE("direct last-box tails for beta(2,3)", "[mp]") {
  auto m = XiModel::beta(2.0, 3.0);
  auto pmf = kstar_pmf(m, 50, 120);
  for (int k : {1, 3, 5, 10, 20}) {
    CHECK(std::abs(kstar_tail_direct(m, 50, k) - pmf_tail(pmf, k)) < 1e-9);
  }
}

TEST_CASE("alternating mean empty count", "[mp]") {
  SECTION("uniform model telescopes to one") {
    auto m = XiModel::beta(1.0, 1.0);
    for (int n : {1, 5, 20, 50, 100, 200}) {
      CHECK(std::abs(e_k0_alt_sum(m, n) - 1.0) < 1e-10);
    }
  }

  SECTION("beta(2,3) frozen value and route agreement") {
    auto m = XiModel::beta(2.0, 3.0);
    CHECK(std::abs(e_k0_alt_sum(m, 6) - 1.814485514485515) < 1e-12);
    CHECK(std::abs(e_k0_alt_sum(m, 100) - e_k0_dp(m, 100)) < 1e-9);
  }

  SECTION("stick-breaking route agreement") {
    auto m = XiModel::gem(2.0);
    CHECK(std::abs(e_k0_alt_sum(m, 40) - k0_pmf(m, 40).mean()) < 1e-9);
  }
}

TEST_CASE("quantile models run through the high precision moments", "[mp]") {
  SECTION("heavy tail model") {
    auto lp = XiModel::logpareto(2.0);
    auto pmf = kstar_pmf(lp, 3, 200);
    for (int k : {1, 2, 4}) {
      CHECK(std::abs(kstar_tail_direct(lp, 3, k) - pmf_tail(pmf, k)) < 1e-9);
    }
  }

  SECTION("slowly varying model mean route") {
    auto e27 = XiModel::example27();
    CHECK(std::abs(e_k0_alt_sum(e27, 4) - e_k0_dp(e27, 4)) < 1e-9);
  }
}

TEST_CASE("double-only models fail hard once cancellation wins", "[mp]") {
  auto noisy = XiModel::custom(
      [](double u) { return std::pow(u, 0.7); }, "pow07",
      CaseInfo{LimitCase::A, 0.0}, true);
  CHECK_THROWS_AS(e_k0_alt_sum(noisy, 180), NumericalError);
}

TEST_CASE("domain guards", "[mp]") {
  auto m = XiModel::beta(1.0, 1.0);
  CHECK_THROWS_AS(kstar_tail_direct(m, 201, 3), NumericalError);
  CHECK_THROWS_AS(e_k0_alt_sum(m, 0), NumericalError);
  CHECK(kstar_tail_direct(m, 5, 0) == 1.0);
}
