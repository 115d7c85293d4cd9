#include "doctest.h"
#include "support.hpp"

#include <map>
#include <set>

using namespace testing;
using doctest::Approx;

namespace {

/// Brute-force reference: variance and mean of the estimator over enumerated outcomes.
struct Moments {
  double variance = 0;
  Vector mean;
  double cardinality = 0;
  double total_probability = 0;
};

Moments enumerate_moments(const SamplingSpec& spec, const Matrix& a) {
  Moments m;
  m.mean = Vector::Zero(a.rows());
  const Vector target = a.rowwise().mean();
  enumerate_outcomes(spec, [&](const Draw& d, double prob) {
    Vector est = Vector::Zero(a.rows());
    for (const Term& t : d.terms) est += t.coefficient * a.col(t.index);
    m.mean += prob * est;
    m.variance += prob * (est - target).squaredNorm();
    m.cardinality += prob * double(d.terms.size());
    m.total_probability += prob;
  });
  return m;
}

SamplingSpec random_table_spec(Rng& rng, SamplingKind kind, Index n) {
  SamplingParams params;
  params.tau = random_between(rng, 1, n);
  params.q = Vector(n);
  params.p = Vector(n);
  for (Index i = 0; i < n; ++i) {
    params.q(i) = 0.05 + uniform01(rng);
    params.p(i) = 0.05 + 0.9 * uniform01(rng);
    params.l.push_back(random_between(rng, 1, 3));
  }
  params.q /= params.q.sum();
  if (kind == SamplingKind::UniformWithReplacement || kind == SamplingKind::Importance)
    params.tau = random_between(rng, 1, std::min<Index>(n, 3));
  return build(kind, params, n);
}

const std::vector<SamplingKind> kTable = {SamplingKind::UniformWithReplacement, SamplingKind::Importance,
                                          SamplingKind::Nice, SamplingKind::Independent, SamplingKind::ExtendedNice};

}  // namespace

TEST_CASE("table constants") {
  const SamplingSpec nc = nice(1000, 10);
  CHECK(nc.A == Approx(990.0 / 9990).epsilon(1e-14));
  CHECK(nc.B == nc.A);
  CHECK(nc.expected_cardinality == 10);
  CHECK((nc.w.array() == 1e-3).all());

  const SamplingSpec full = nice(7, 7);
  CHECK(full.A == 0);
  CHECK(full.B == 0);

  Vector p(2);
  p << 0.5, 0.5;
  const SamplingSpec ind = independent(p);
  CHECK(ind.A == Approx(0.5));
  CHECK(ind.B == 0);
  CHECK(ind.w(0) == Approx(0.5));
  CHECK(ind.expected_cardinality == Approx(1));

  const SamplingSpec uwr = uniform_with_replacement(5, 4);
  CHECK(uwr.A == Approx(0.25));
  CHECK(uwr.B == Approx(0.25));

  const SamplingSpec en = extended_nice({1, 2, 3}, 2);
  CHECK(en.A == Approx((6.0 - 2) / (2 * 5.0)));
  CHECK(en.w(2) == Approx(0.5));

  const SamplingSpec fb = full_batch(4);
  CHECK(fb.A == 0);
  CHECK(fb.B == 0);
  CHECK(fb.expected_cardinality == 4);
}

TEST_CASE("importance with uniform probabilities is uniform with replacement") {
  const SamplingSpec imp = importance(Vector::Constant(8, 1.0 / 8), 3);
  const SamplingSpec uwr = uniform_with_replacement(8, 3);
  CHECK(imp.A == uwr.A);
  CHECK(imp.B == uwr.B);
  CHECK(imp.w.isApprox(uwr.w, 1e-15));
  CHECK(imp.expected_cardinality == uwr.expected_cardinality);
}

TEST_CASE("builders reject invalid parameters") {
  CHECK_THROWS_AS(nice(5, 0), InvalidArgument);
  CHECK_THROWS_AS(nice(5, 6), InvalidArgument);
  CHECK_THROWS_AS(uniform_with_replacement(0, 1), InvalidArgument);
  Vector q(3);
  q << 0.5, 0.5, 0.0;
  CHECK_THROWS_AS(importance(q, 1), InvalidArgument);
  q << 0.5, 0.3, 0.3;
  CHECK_THROWS_AS(importance(q, 1), InvalidArgument);
  Vector p(2);
  p << 0.0, 0.5;
  CHECK_THROWS_AS(independent(p), InvalidArgument);
  p << 0.5, 1.0;
  CHECK_THROWS_AS(independent(p), InvalidArgument);
  CHECK_THROWS_AS(extended_nice({1, 0, 2}, 1), InvalidArgument);
  CHECK_THROWS_AS(build(SamplingKind::Importance, SamplingParams{}, 3), DimensionMismatch);
  CHECK_THROWS_AS(optimal_importance_weights(Vector::Zero(3)), InvalidArgument);
  CHECK_THROWS_AS(parse_sampling_kind("bogus"), InvalidArgument);
}

TEST_CASE("optimal importance weights") {
  Vector L(3);
  L << 1, 2, 3;
  const Vector q = optimal_importance_weights(L);
  CHECK(q(0) == Approx(1.0 / 6));
  CHECK(q(1) == Approx(1.0 / 3));
  CHECK(q(2) == Approx(0.5));
  CHECK(weighted_constants(L, q).L_plus_w_sq == Approx(4));
  CHECK(optimal_importance_weights(Vector::Constant(4, 2.5)).isApprox(Vector::Constant(4, 0.25)));
}

TEST_CASE("draws") {
  Rng rng = make_rng(1);
  const Draw all = draw(nice(3, 3), rng);
  REQUIRE(all.terms.size() == 3);
  std::set<Index> seen;
  for (const Term& t : all.terms) {
    seen.insert(t.index);
    CHECK(t.coefficient == Approx(1.0 / 3));
  }
  CHECK(seen == std::set<Index>{0, 1, 2});

  Draw single;
  single.terms = {{0, 1.0}};
  single.raw_size = 1;
  Matrix a(2, 2);
  a << 1, 0, 0, 1;
  const Vector est = apply(single, a);
  CHECK(est(0) == 1.0);
  CHECK(est(1) == 0.0);

  Draw empty;
  CHECK(apply(empty, a).isZero());

  // raw size counts repeats; terms merge them
  for (int k = 0; k < 50; ++k) {
    const Draw d = draw(uniform_with_replacement(3, 3), rng);
    CHECK(d.raw_size == 3);
    CHECK(d.terms.size() <= 3);
    double total = 0;
    for (const Term& t : d.terms) total += t.coefficient;
    CHECK(total == Approx(1.0));
  }
}

TEST_CASE("independent draws can be empty and contribute nothing") {
  Vector p(3);
  p << 0.01, 0.01, 0.01;
  Rng rng = make_rng(2);
  bool saw_empty = false;
  for (int k = 0; k < 200 && !saw_empty; ++k) {
    const Draw d = draw(independent(p), rng);
    if (d.terms.empty()) {
      saw_empty = true;
      CHECK(d.raw_size == 0);
      CHECK(apply(d, Matrix::Ones(2, 3)).isZero());
    }
  }
  CHECK(saw_empty);
}

TEST_CASE("exact variance examples") {
  Matrix a(2, 2);
  a << 1, 0, 0, 1;
  const ExactVariance nv = variance_exact(nice(2, 1), a);
  CHECK(nv.variance == Approx(0.5));
  CHECK(nv.rhs_bound == Approx(0.5));

  Vector q(2);
  q << 0.75, 0.25;
  const ExactVariance iv = variance_exact(importance(q, 1), a);
  CHECK(iv.variance == Approx(5.0 / 6));
  CHECK(iv.rhs_bound == Approx(5.0 / 6));

  const Matrix same = Matrix::Constant(3, 4, 1.5);
  const ExactVariance cv = variance_exact(nice(4, 2), same);
  CHECK(std::abs(cv.variance) < 1e-14);
  CHECK(std::abs(cv.rhs_bound) < 1e-14);
}

TEST_CASE("enumeration agrees with a brute-force reference on every table kind") {
  Rng rng = make_rng(3);
  for (SamplingKind kind : kTable) {
    for (int t = 0; t < 20; ++t) {
      const Index n = random_between(rng, 2, 5);
      const SamplingSpec spec = random_table_spec(rng, kind, n);
      const Matrix a = random_matrix(rng, 3, n);
      const Moments ref = enumerate_moments(spec, a);
      const ExactVariance ev = variance_exact(spec, a);
      CHECK(ref.total_probability == Approx(1.0).epsilon(1e-12));
      CHECK(max_abs_diff(ref.mean, a.rowwise().mean()) < 1e-12);
      CHECK(ev.variance == Approx(ref.variance).epsilon(1e-12));
      CHECK(std::abs(ev.variance - ev.rhs_bound) <= 1e-12 * std::max(1.0, ev.rhs_bound));
      CHECK(ev.mean_error <= 1e-12);
      CHECK(ab_rhs(spec, a) == Approx(ev.rhs_bound).epsilon(1e-12));
      if (kind == SamplingKind::Nice || kind == SamplingKind::Independent)
        CHECK(ev.expected_cardinality == Approx(spec.expected_cardinality).epsilon(1e-12));
      else
        CHECK(ev.expected_cardinality <= double(spec.tau) + 1e-12);
    }
  }
}

TEST_CASE("enumeration refuses oversized outcome spaces") {
  Rng rng = make_rng(4);
  CHECK_THROWS_AS(variance_exact(uniform_with_replacement(50, 10), random_matrix(rng, 2, 50)), BudgetExceeded);
  CHECK(outcome_count(nice(5, 2)) == Approx(10));
}

TEST_CASE("draw frequencies match the enumerated law") {
  Rng rng = make_rng(5);
  Vector q(4);
  q << 0.1, 0.2, 0.3, 0.4;
  const SamplingSpec spec = importance(q, 2);
  std::map<std::vector<std::pair<Index, double>>, double> law;
  auto key = [](const Draw& d) {
    std::vector<std::pair<Index, double>> k;
    for (const Term& t : d.terms) k.emplace_back(t.index, t.coefficient);
    std::sort(k.begin(), k.end());
    return k;
  };
  enumerate_outcomes(spec, [&](const Draw& d, double prob) { law[key(d)] += prob; });
  std::map<std::vector<std::pair<Index, double>>, int> counts;
  const int trials = 40000;
  for (int k = 0; k < trials; ++k) ++counts[key(draw(spec, rng))];
  for (const auto& [outcome, prob] : law) {
    const double se = std::sqrt(prob * (1 - prob) / trials);
    CHECK(std::abs(counts[outcome] / double(trials) - prob) < 5 * se + 1e-12);
  }
}

TEST_CASE("Monte-Carlo checks") {
  Rng rng = make_rng(6);
  const Matrix a = random_matrix(rng, 3, 1000);
  const MonteCarloVariance nv = variance_mc(nice(1000, 10), a, 100000, rng);
  CHECK_FALSE(nv.violated);
  CHECK_FALSE(nv.biased);
  CHECK(std::abs(nv.variance_est - nv.rhs_bound) < 4 * nv.variance_standard_error);

  const MonteCarloVariance fv = variance_mc(full_batch(1000), a, 1000, rng);
  CHECK(fv.variance_est < 1e-25);
  CHECK_FALSE(fv.violated);

  Vector p(50);
  for (Index i = 0; i < 50; ++i) p(i) = 0.05 + 0.9 * uniform01(rng);
  const Matrix b = random_matrix(rng, 3, 50);
  const SamplingSpec ind = independent(p);
  CHECK(ind.B == 0);
  const MonteCarloVariance iv = variance_mc(ind, b, 100000, rng);
  CHECK_FALSE(iv.violated);
  CHECK(std::abs(iv.variance_est - iv.rhs_bound) < 4 * iv.variance_standard_error);

  CHECK_THROWS_AS(variance_mc(nice(1000, 10), a, 10, rng), InvalidArgument);
}

TEST_CASE("composition reduces to the outer constant with full-batch inner samplings") {
  const SamplingSpec outer = nice(4, 2);
  std::vector<SamplingSpec> inner(4, full_batch(3));
  const std::vector<ClientConstants> client(4, {2.0, 1.0});
  const ComposedVariance cv = compose_variance(outer, inner, client, 3.0, 0.7);
  CHECK(cv.effective == Approx((outer.A - outer.B) * 3.0 + outer.B * 0.7));
}

TEST_CASE("stratified composition keeps only the inner terms") {
  const Index g = 3;
  const SamplingSpec outer = full_batch(g);
  std::vector<SamplingSpec> inner(g, nice(5, 2));
  std::vector<ClientConstants> client = {{1.0, 0.4}, {2.0, 0.9}, {0.5, 0.1}};
  const ComposedVariance cv = compose_variance(outer, inner, client, 9.0, 9.0);
  double expected = 0;
  for (const auto& c : client) expected += (1.0 / g) * inner[0].A * c.L_pm_w_sq;
  CHECK(cv.effective == Approx(expected / g));
}

TEST_CASE("composed estimator on two clients of two points") {
  Rng rng = make_rng(7);
  const std::vector<SamplingSpec> inner = {uniform_with_replacement(2, 1), uniform_with_replacement(2, 1)};
  for (int t = 0; t < 20; ++t) {
    const std::vector<Matrix> v = {random_matrix(rng, 3, 2), random_matrix(rng, 3, 2)};
    const ComposedExact ce = composed_variance_exact(uniform_with_replacement(2, 1), inner, v);
    CHECK(ce.mean_error < 1e-12);
    CHECK(ce.variance <= ce.rhs_bound + 1e-12);
    CHECK(composed_rhs(uniform_with_replacement(2, 1), inner, v) == Approx(ce.rhs_bound).epsilon(1e-12));
  }
}

TEST_CASE("composition errors") {
  std::vector<SamplingSpec> inner(3, full_batch(2));
  CHECK_THROWS_AS(check_composition(nice(4, 2), inner), DimensionMismatch);
  SamplingSpec wild = nice(3, 1);
  wild.B = 2;
  CHECK_THROWS_AS(check_composition(wild, inner), InvalidArgument);
}
