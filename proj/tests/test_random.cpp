#include "doctest.h"
#include "pagesamp/random.hpp"

#include <cmath>
#include <vector>

using namespace pagesamp;

TEST_CASE("streams are reproducible and distinct") {
  Rng a = make_rng(7, 0), b = make_rng(7, 0), c = make_rng(7, 1), e = make_rng(8, 0);
  for (int k = 0; k < 100; ++k) {
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != e());
  }
}

TEST_CASE("uniform01 stays in [0, 1) with the right moments") {
  Rng rng = make_rng(1);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int k = 0; k < n; ++k) {
    const double u = uniform01(rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12).epsilon(0.02));
}

TEST_CASE("uniform_index covers its range evenly") {
  Rng rng = make_rng(2);
  const std::uint64_t bound = 7;
  std::vector<int> counts(bound, 0);
  const int n = 70000;
  for (int k = 0; k < n; ++k) {
    const auto i = uniform_index(rng, bound);
    REQUIRE(i < bound);
    ++counts[i];
  }
  double chi2 = 0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  CHECK(chi2 < 22.5);   // 6 degrees of freedom, p ~ 0.001
  CHECK(uniform_index(rng, 1) == 0);
}

TEST_CASE("normal and exponential variates have the right moments") {
  Rng rng = make_rng(3);
  const int n = 200000;
  double ns = 0, nsq = 0, es = 0, esq = 0;
  for (int k = 0; k < n; ++k) {
    const double z = standard_normal(rng);
    const double x = standard_exponential(rng);
    REQUIRE(std::isfinite(z));
    REQUIRE(x >= 0.0);
    ns += z, nsq += z * z, es += x, esq += x * x;
  }
  CHECK(std::abs(ns / n) < 0.01);
  CHECK(nsq / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(es / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(esq / n == doctest::Approx(2.0).epsilon(0.04));
}
