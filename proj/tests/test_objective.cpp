#include "doctest.h"
#include "support.hpp"

#include <cmath>
#include <numbers>

using namespace testing;
using doctest::Approx;

namespace {

std::shared_ptr<const QuadraticProblem> single(Matrix a, Vector b) {
  std::vector<QuadraticComponent> comps{QuadraticComponent::from_dense(std::move(a), std::move(b))};
  const Index d = comps[0].dim();
  return std::make_shared<QuadraticProblem>(std::move(comps), Vector::Zero(d));
}

Vector scalar(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST_CASE("component gradient of a quadratic at the origin is b") {
  const auto p = single(Matrix::Identity(2, 2), Vector::Unit(2, 0));
  const Vector g = component_grad(*p, 0, Vector::Zero(2));
  CHECK(g(0) == 1.0);
  CHECK(g(1) == 0.0);
}

TEST_CASE("example gradients and values") {
  const ExampleFixture ex2 = example_fixture(2, {4, 1, 4, 2, 2});
  CHECK(component_grad(*ex2.problem, 0, scalar(3))(0) == Approx(12));
  CHECK(component_grad(*ex2.problem, 1, scalar(3))(0) == 0.0);

  const ExampleFixture ex1 = example_fixture(1, {10, 5, 2, 2, 2});
  CHECK(full_grad(*ex1.problem, scalar(1))(0) == Approx(2));

  const ExampleFixture ex2b = example_fixture(2, {2, 1, 4, 2, 2});
  CHECK(value(*ex2b.problem, scalar(1)) == Approx(1));

  const ExampleFixture ex3 = example_fixture(3, {6, 1, 3, 3, 2});
  REQUIRE(ex3.grouped);
  CHECK(ex3.grouped->value(scalar(2)) == Approx(2));
  CHECK(ex3.grouped->client_level()->objective(scalar(2)) == Approx(2));
}

TEST_CASE("zero quadratic has zero value everywhere") {
  const auto p = single(Matrix::Zero(3, 3), Vector::Zero(3));
  Rng rng = make_rng(4);
  for (int k = 0; k < 5; ++k) CHECK(value(*p, random_vector(rng, 3)) == 0.0);
}

TEST_CASE("full gradient and value are means of the components") {
  Rng rng = make_rng(5);
  const auto p = random_quadratic(rng, 13, 4);
  for (int k = 0; k < 10; ++k) {
    const Vector x = random_vector(rng, 4);
    Vector mean = Vector::Zero(4);
    double f = 0;
    for (Index i = 0; i < p->size(); ++i) {
      mean += component_grad(*p, i, x) / 13.0;
      f += p->component_value(i, x) / 13.0;
    }
    const Vector g = full_grad(*p, x);
    for (Index c = 0; c < 4; ++c) CHECK(std::abs(g(c) - mean(c)) <= 1e-12 * std::max(1.0, std::abs(mean(c))));
    CHECK(value(*p, x) == Approx(f).epsilon(1e-12));
  }
}

TEST_CASE("component difference matches two gradients") {
  Rng rng = make_rng(6);
  const auto p = random_quadratic(rng, 5, 3);
  const Vector x = random_vector(rng, 3), y = random_vector(rng, 3);
  Vector diff(3);
  p->component_gradient_diff(2, x, y, diff);
  CHECK(max_abs_diff(diff, component_grad(*p, 2, x) - component_grad(*p, 2, y)) < 1e-12);
}

TEST_CASE("checked entry points reject bad arguments") {
  Rng rng = make_rng(7);
  const auto p = random_quadratic(rng, 3, 2);
  CHECK_THROWS_AS(component_grad(*p, 3, Vector::Zero(2)), IndexOutOfRange);
  CHECK_THROWS_AS(component_grad(*p, -1, Vector::Zero(2)), IndexOutOfRange);
  CHECK_THROWS_AS(full_grad(*p, Vector::Zero(3)), DimensionMismatch);
  Vector bad = Vector::Zero(2);
  bad(0) = std::nan("");
  CHECK_THROWS_AS(value(*p, bad), InvalidArgument);
  CHECK_THROWS_AS(grad_check(*p, Vector::Zero(2), 0.0), InvalidArgument);
}

TEST_CASE("weighted constants") {
  Vector L(3);
  L << 1, 2, 3;
  const WeightedConstants uniform = weighted_constants(L, Vector::Constant(3, 1.0 / 3));
  CHECK(uniform.L_plus_w_sq == Approx(14.0 / 3));
  CHECK(weighted_constants(L, L / L.sum()).L_plus_w_sq == Approx(4.0));
  for (double c : {0.5, 2.0, 7.0}) {
    CHECK(weighted_constants(Vector::Constant(5, c), Vector::Constant(5, 0.2)).L_plus_w_sq == Approx(c * c));
  }
  CHECK_THROWS_AS(weighted_constants(L, Vector::Constant(2, 0.5)), DimensionMismatch);
  Vector w(3);
  w << 0.5, 0.5, 0.0;
  CHECK_THROWS_AS(weighted_constants(L, w), InvalidArgument);
  CHECK_THROWS_AS(check_simplex(Vector::Constant(3, 0.3)), InvalidArgument);
}

TEST_CASE("importance weights never lose to uniform weights") {
  Rng rng = make_rng(8);
  for (int t = 0; t < 200; ++t) {
    const Index n = random_between(rng, 1, 30);
    Vector L(n);
    for (Index i = 0; i < n; ++i) L(i) = 1e-3 + 5 * uniform01(rng) * uniform01(rng);
    const double best = weighted_constants(L, L / L.sum()).L_plus_w_sq;
    CHECK(best == Approx(L.mean() * L.mean()).epsilon(1e-12));
    CHECK(best <= weighted_constants(L, Vector::Constant(n, 1.0 / double(n))).L_plus_w_sq * (1 + 1e-14));
    // any other point of the simplex is no better
    Vector w(n);
    for (Index i = 0; i < n; ++i) w(i) = 0.01 + uniform01(rng);
    w /= w.sum();
    CHECK(best <= weighted_constants(L, w).L_plus_w_sq * (1 + 1e-14));
  }
}

TEST_CASE("fixture 1 constants from the estimators") {
  const ExampleFixture ex1 = example_fixture(1, {10, 5, 2, 2, 2});
  const SmoothnessReport sm = lipschitz_constants(*ex1.problem);
  CHECK(sm.L_minus == Approx(2));
  CHECK((sm.L.array() * sm.L.array()).mean() == Approx(29));
  Rng rng = make_rng(9);
  const Vector w = Vector::Constant(10, 0.1);
  CHECK(empirical_hessian_variance(*ex1.problem, w, 200, rng) == Approx(25).epsilon(1e-9));
  CHECK(sampling_constants(*ex1.problem, w, ConstantsMode::Exact).L_pm_w_sq == Approx(25).epsilon(1e-12));
}

TEST_CASE("identical components have zero Hessian variance") {
  std::vector<QuadraticComponent> comps;
  Matrix a(2, 2);
  a << 2, 1, 1, 3;
  for (int i = 0; i < 6; ++i) comps.push_back(QuadraticComponent::from_dense(a, Vector::Ones(2)));
  const QuadraticProblem p(std::move(comps), Vector::Zero(2));
  Rng rng = make_rng(10);
  CHECK(empirical_hessian_variance(p, Vector::Constant(6, 1.0 / 6), 50, rng) < 1e-12);
  CHECK(sampling_constants(p, Vector::Constant(6, 1.0 / 6), ConstantsMode::Exact).L_pm_w_sq < 1e-12);
}

TEST_CASE("exact constants are dominated by the per-component bound") {
  Rng rng = make_rng(11);
  for (int t = 0; t < 20; ++t) {
    const Index n = random_between(rng, 2, 8);
    const auto p = random_quadratic(rng, n, 3, t % 2 == 0);
    Vector w(n);
    for (Index i = 0; i < n; ++i) w(i) = 0.05 + uniform01(rng);
    w /= w.sum();
    const WeightedConstants exact = sampling_constants(*p, w, ConstantsMode::Exact);
    const WeightedConstants bound = sampling_constants(*p, w, ConstantsMode::ComponentBound);
    CHECK(exact.L_plus_w_sq <= bound.L_plus_w_sq * (1 + 1e-12));
    CHECK(exact.L_pm_w_sq <= exact.L_plus_w_sq * (1 + 1e-12));
    CHECK(exact.L_pm_w_sq >= -1e-12);
  }
}

TEST_CASE("finite-difference gradient check") {
  Rng rng = make_rng(12);
  const auto p = random_quadratic(rng, 6, 4);
  CHECK(grad_check(*p, random_vector(rng, 4), 1e-5) < 1e-6);
  const auto linear = single(Matrix::Zero(3, 3), random_vector(rng, 3));
  CHECK(grad_check(*linear, random_vector(rng, 3), 1e-3) < 1e-12);
}

TEST_CASE("per-component Lipschitz constants bound gradient differences") {
  Rng rng = make_rng(13);
  const auto p = random_quadratic(rng, 8, 5, false);
  const SmoothnessReport sm = lipschitz_constants(*p);
  for (int t = 0; t < 100; ++t) {
    const Vector x = random_vector(rng, 5), y = random_vector(rng, 5);
    const Index i = random_between(rng, 0, 7);
    const double lhs = (component_grad(*p, i, x) - component_grad(*p, i, y)).norm();
    CHECK(lhs <= sm.L(i) * (x - y).norm() * (1 + 1e-9));
    const double mean = (full_grad(*p, x) - full_grad(*p, y)).norm();
    CHECK(mean <= sm.L_minus * (x - y).norm() * (1 + 1e-9));
  }
}

TEST_CASE("stencil components use the closed-form spectrum") {
  const double c = 0.3, shift = 0.01;
  const Index d = 10;
  std::vector<QuadraticComponent> comps{QuadraticComponent::stencil(c, shift, Vector::Zero(d))};
  const QuadraticProblem p(std::move(comps), Vector::Zero(d));
  const double expected = c * (2 + 2 * std::cos(std::numbers::pi / double(d + 1))) + shift;
  CHECK(p.smoothness().L(0) == Approx(expected).epsilon(1e-12));
  const auto dense = p.component(0).to_dense();
  CHECK(symmetric_spectral_norm(dense) == Approx(expected).epsilon(1e-10));
}

TEST_CASE("grouped problem flattens to the same objective") {
  Rng rng = make_rng(14);
  const auto p = random_quadratic(rng, 7, 3);
  const GroupedProblem grouped(p, {{0, 1, 2}, {3}, {4, 5, 6}});
  const auto flat = grouped.flattened();
  CHECK(flat->size() == 7);
  for (int t = 0; t < 5; ++t) {
    const Vector x = random_vector(rng, 3);
    const Vector g = grouped.gradient(x);
    CHECK(max_abs_diff(full_grad(*flat, x), g) < 1e-12);
    CHECK(max_abs_diff(full_grad(*grouped.client_level(), x), g) < 1e-12);
    CHECK(flat->objective(x) == Approx(grouped.value(x)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(GroupedProblem(p, {{0, 9}}), IndexOutOfRange);
  CHECK_THROWS_AS(GroupedProblem(p, {{0}, {}}), InvalidArgument);
}
