#include "doctest.h"
#include "support.hpp"

#include <map>

using namespace testing;
using doctest::Approx;

namespace {

bool same_records(const Trace& a, const Trace& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    const auto &x = a.records[k], &y = b.records[k];
    if (x.iteration != y.iteration || x.calls != y.calls || x.grad_norm_sq != y.grad_norm_sq ||
        x.objective != y.objective || x.refreshed != y.refreshed || x.estimator_error_sq != y.estimator_error_sq)
      return false;
  }
  return true;
}

PageConfig config(double gamma, double p, std::int64_t T, std::uint64_t seed = 1) {
  PageConfig cfg;
  cfg.gamma = gamma;
  cfg.p = p;
  cfg.iterations = T;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("nonconvex stepsize") {
  const double p = 10.0 / 110;
  CHECK(stepsize_nonconvex(1, 0.1, 0.1, 123.0, 1, p) == Approx(0.5));
  CHECK(stepsize_nonconvex(2.5, 0.3, 0.1, 4.0, 9.0, 1.0) == Approx(0.4));
  // with A = B the L_+ constant drops out
  CHECK(stepsize_nonconvex(1, 0.2, 0.2, 1.0, 3.0, 0.3) == stepsize_nonconvex(1, 0.2, 0.2, 50.0, 3.0, 0.3));
  CHECK_THROWS_AS(stepsize_nonconvex(1, 0.1, 0.1, 1, 1, 0.0), InvalidArgument);
  CHECK_THROWS_AS(stepsize_nonconvex(1, 0.1, 0.1, 1, 1, 1.5), InvalidArgument);
  CHECK_THROWS_AS(stepsize_nonconvex(0, 0, 0, 0, 0, 0.5), InvalidArgument);
}

TEST_CASE("stepsize monotonicity") {
  Rng rng = make_rng(1);
  for (int t = 0; t < 200; ++t) {
    const double L = 0.1 + uniform01(rng), Lp = uniform01(rng), Lpm = uniform01(rng);
    const double B = uniform01(rng), A = B + uniform01(rng), p = 0.01 + 0.98 * uniform01(rng);
    const double base = stepsize_nonconvex(L, A, B, Lp, Lpm, p);
    CHECK(stepsize_nonconvex(L, A * 1.5, B, Lp, Lpm, p) <= base);
    CHECK(stepsize_nonconvex(L, A, B, Lp, Lpm * 1.5, p) <= base);
    CHECK(stepsize_nonconvex(L, A, B, Lp, Lpm, p * 0.5) <= base);
  }
}

TEST_CASE("PL stepsize") {
  CHECK(stepsize_pl(1, 0.1, 0.1, 7.0, 1, 0.5, 0.01) == Approx(1 / (1 + std::sqrt(0.2))));
  CHECK(stepsize_pl(1, 0.1, 0.1, 7.0, 1, 0.5, 100.0) == Approx(0.5 / 200));
  // small mu leaves the first branch, which doubles the variance term
  const double first = stepsize_pl(1.3, 0.4, 0.2, 2.0, 1.0, 0.2, 1e-12);
  const double doubled = stepsize_nonconvex(1.3, 0.4, 0.2, 2 * 2.0, 2 * 1.0, 0.2);
  CHECK(first == Approx(doubled).epsilon(1e-14));
  CHECK_THROWS_AS(stepsize_pl(1, 0.1, 0.1, 1, 1, 0.5, 0.0), InvalidArgument);
}

TEST_CASE("composed stepsize reduces and grows with inner batches") {
  const SamplingSpec outer = uniform_with_replacement(4, 2);
  const std::vector<ClientConstants> client = {{3.0, 1.0}, {2.0, 0.5}, {4.0, 2.0}, {1.0, 0.2}};
  const std::vector<SamplingSpec> full(4, full_batch(16));
  const ComposedVariance reduced = compose_variance(outer, full, client, 5.0, 2.0);
  CHECK(stepsize_composed(1.2, reduced, 0.1) ==
        Approx(stepsize_nonconvex(1.2, outer.A, outer.B, 5.0, 2.0, 0.1)).epsilon(1e-14));
  double previous = 0;
  for (Index tau = 1; tau <= 16; tau *= 2) {
    const std::vector<SamplingSpec> inner(4, nice(16, tau));
    const double gamma = stepsize_composed(1.2, compose_variance(outer, inner, client, 5.0, 2.0), 0.1);
    CHECK(gamma >= previous);
    previous = gamma;
  }
}

TEST_CASE("refresh probability, budget and complexity") {
  CHECK(default_p(10, 1000) == Approx(10.0 / 1010));
  CHECK(default_p(50, 50) == Approx(0.5));
  CHECK(iteration_budget(1, 0.01, 0.5) == 400);
  CHECK(iteration_budget(1, 10, 0.5) == 1);
  CHECK(iteration_budget(3, 0.02, 0.125) == 2 * iteration_budget(3, 0.02, 0.25));
  CHECK(expected_complexity(1000, 10, 400) == Approx(9000));
  CHECK(expected_complexity(1000, 10, 0) == Approx(1000));
  CHECK(expected_calls(100, 2, 1.0, 10) == Approx(1100));
  CHECK(expected_calls(100, 2, 0.5, 10) == Approx(100 + 51 * 10));
}

TEST_CASE("p = 1 is gradient descent bit for bit") {
  Rng rng = make_rng(2);
  const auto problem = random_quadratic(rng, 6, 4);
  PageConfig cfg = config(0.05, 1.0, 200);
  cfg.output_rule = OutputRule::LastIterate;
  const Trace trace = run_page(*problem, nice(6, 2), cfg);
  Vector x = problem->initial_point(), g(4), x_new(4);
  problem->gradient(x, g);
  for (int t = 0; t < 200; ++t) {
    x_new = x - 0.05 * g;
    problem->gradient(x_new, g);
    x.swap(x_new);
  }
  CHECK(trace.final_point == x);
  CHECK(trace.selected_point == x);
  CHECK(trace.refreshes == 200);
  CHECK(trace.total_calls == 6 * 201);
}

TEST_CASE("full-batch estimator is always exact") {
  Rng rng = make_rng(3);
  const auto problem = random_quadratic(rng, 5, 3);
  PageConfig cfg = config(0.05, 0.1, 300);
  cfg.monitor.every = 1;
  const Trace trace = run_page(*problem, full_batch(5), cfg);
  for (const auto& r : trace.records) CHECK(r.estimator_error_sq < 1e-24);
}

TEST_CASE("runs are deterministic and refreshes reset the estimator") {
  const QuadraticTask task = gen_controlled_lpm(50, 5, 0.01, 0.5, 3);
  PageConfig cfg = config(0.1, 0.05, 2000, 11);
  cfg.monitor.every = 1;
  const Trace a = run_page(*task.problem, uniform_with_replacement(50, 2), cfg);
  const Trace b = run_page(*task.problem, uniform_with_replacement(50, 2), cfg);
  CHECK(same_records(a, b));
  CHECK(a.final_point == b.final_point);
  CHECK(a.selected_point == b.selected_point);
  int refreshed = 0;
  for (const auto& r : a.records) {
    if (!r.refreshed) continue;
    ++refreshed;
    CHECK(r.estimator_error_sq <= 1e-24);
  }
  CHECK(refreshed == a.refreshes + 1);
  cfg.seed = 12;
  CHECK_FALSE(same_records(a, run_page(*task.problem, uniform_with_replacement(50, 2), cfg)));
}

TEST_CASE("call counts follow the accounting") {
  const QuadraticTask task = gen_controlled_lpm(100, 5, 0.01, 0.5, 4);
  const SamplingSpec spec = nice(100, 4);
  PageConfig cfg = config(0.1, default_p(4, 100), 5000, 5);
  const Trace per_index = run_page(*task.problem, spec, cfg);
  const std::int64_t steps = 5000 - per_index.refreshes;
  CHECK(per_index.total_calls == 100 + 100 * per_index.refreshes + 4 * steps);
  cfg.accounting = CallAccounting::PerEvaluation;
  const Trace per_eval = run_page(*task.problem, spec, cfg);
  CHECK(per_eval.refreshes == per_index.refreshes);
  CHECK(per_eval.total_calls == 100 + 100 * per_index.refreshes + 8 * steps);

  std::int64_t previous = 0;
  for (const auto& r : per_index.records) {
    CHECK(r.calls >= previous);
    previous = r.calls;
  }
  CHECK(per_index.records.front().calls == 100);

  const double T = 5000, card = 4, n = 100, delta = 0.2;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    cfg.accounting = CallAccounting::PerSampledIndex;
    const double measured = double(run_page(*task.problem, spec, cfg).total_calls);
    CHECK(measured >= n + card * T * (1 - delta));
    CHECK(measured <= n + 2 * card * T * (1 + delta));
  }
}

TEST_CASE("one step of the estimator is unbiased") {
  // Two components, uniform sampling with one index: three possible second iterates.
  std::vector<QuadraticComponent> comps;
  Matrix a0(2, 2), a1(2, 2);
  a0 << 2, 0.5, 0.5, 1;
  a1 << 0.3, -0.2, -0.2, 3;
  Vector b0(2), b1(2);
  b0 << 1, -1;
  b1 << -0.5, 2;
  comps.push_back(QuadraticComponent::from_dense(a0, b0));
  comps.push_back(QuadraticComponent::from_dense(a1, b1));
  Vector x0(2);
  x0 << 1, 2;
  const QuadraticProblem problem(std::move(comps), x0);
  const double gamma = 0.1, p = 0.3;

  const Vector g0 = full_grad(problem, x0);
  const Vector x1 = x0 - gamma * g0;
  std::vector<std::pair<Vector, double>> law;
  law.emplace_back(x1 - gamma * full_grad(problem, x1), p);
  for (Index i = 0; i < 2; ++i) {
    const Vector est = g0 + (component_grad(problem, i, x1) - component_grad(problem, i, x0));
    law.emplace_back(x1 - gamma * est, (1 - p) / 2);
  }
  Vector expected_g = Vector::Zero(2);
  for (const auto& [x2, prob] : law) expected_g += prob * (x1 - x2) / gamma;
  CHECK(max_abs_diff(expected_g, full_grad(problem, x1)) < 1e-12);

  std::vector<int> counts(law.size(), 0);
  const int trials = 6000;
  for (int s = 1; s <= trials; ++s) {
    const Trace t = run_page(problem, uniform_with_replacement(2, 1), config(gamma, p, 2, std::uint64_t(s)));
    bool matched = false;
    for (std::size_t k = 0; k < law.size(); ++k) {
      if (max_abs_diff(t.final_point, law[k].first) < 1e-14) {
        ++counts[k];
        matched = true;
        break;
      }
    }
    CHECK(matched);
  }
  for (std::size_t k = 0; k < law.size(); ++k) {
    const double q = law[k].second, se = std::sqrt(q * (1 - q) / trials);
    CHECK(std::abs(counts[k] / double(trials) - q) < 5 * se);
  }
}

TEST_CASE("composed runner reductions") {
  const QuadraticTask task = gen_controlled_lpm(12, 4, 0.01, 0.5, 6);
  PageConfig cfg = config(0.1, 0.1, 500, 3);
  cfg.monitor.every = 5;

  SUBCASE("one client with a full-batch outer sampling") {
    std::vector<Index> all(12);
    for (Index i = 0; i < 12; ++i) all[std::size_t(i)] = i;
    const GroupedProblem one(task.problem, {all});
    const Trace composed = run_page_composed(one, full_batch(1), {nice(12, 3)}, cfg);
    const Trace direct = run_page(*task.problem, nice(12, 3), cfg);
    REQUIRE(composed.records.size() == direct.records.size());
    for (std::size_t k = 0; k < direct.records.size(); ++k) {
      CHECK(composed.records[k].calls == direct.records[k].calls);
      CHECK(composed.records[k].grad_norm_sq == Approx(direct.records[k].grad_norm_sq).epsilon(1e-12));
    }
    CHECK(max_abs_diff(composed.final_point, direct.final_point) < 1e-12);
  }

  SUBCASE("full-batch inner samplings follow the client-level run") {
    const GroupedProblem grouped = stratify(task.problem, 4, StratifyRule::Contiguous);
    const std::vector<SamplingSpec> inner(4, full_batch(3));
    const Trace composed = run_page_composed(grouped, uniform_with_replacement(4, 2), inner, cfg);
    const Trace single = run_page(*grouped.client_level(), uniform_with_replacement(4, 2), cfg);
    CHECK(composed.final_point == single.final_point);
    REQUIRE(composed.records.size() == single.records.size());
    for (std::size_t k = 0; k < single.records.size(); ++k) {
      CHECK(composed.records[k].grad_norm_sq == single.records[k].grad_norm_sq);
      CHECK(composed.records[k].refreshed == single.records[k].refreshed);
    }
  }

  SUBCASE("structural mismatches") {
    const GroupedProblem grouped = stratify(task.problem, 4, StratifyRule::Contiguous);
    CHECK_THROWS_AS(run_page_composed(grouped, nice(3, 1), std::vector<SamplingSpec>(3, full_batch(3)), cfg),
                    DimensionMismatch);
    CHECK_THROWS_AS(run_page_composed(grouped, nice(4, 1), std::vector<SamplingSpec>(4, full_batch(2)), cfg),
                    DimensionMismatch);
  }
}

TEST_CASE("divergence is reported") {
  const QuadraticTask task = gen_controlled_lpm(10, 4, 0.01, 0.5, 7);
  CHECK_THROWS_AS(run_page(*task.problem, full_batch(10), config(1e6, 1.0, 5000)), Divergence);
  CHECK_THROWS_AS(run_page(*task.problem, full_batch(10), config(-1, 0.5, 10)), InvalidArgument);
  CHECK_THROWS_AS(run_page(*task.problem, full_batch(9), config(0.1, 0.5, 10)), DimensionMismatch);
}

TEST_CASE("output rules and monitoring") {
  const QuadraticTask task = gen_controlled_lpm(20, 4, 0.01, 0.5, 8);
  PageConfig cfg = config(0.2, 0.1, 1000, 4);
  cfg.output_rule = OutputRule::BestGradientIterate;
  cfg.monitor.every = 10;
  const Trace best = run_page(*task.problem, nice(20, 2), cfg);
  double smallest = best.records.front().grad_norm_sq;
  for (const auto& r : best.records) smallest = std::min(smallest, r.grad_norm_sq);
  CHECK(best.selected_grad_norm_sq == Approx(smallest).epsilon(1e-12));

  cfg.output_rule = OutputRule::UniformRandomIterate;
  const Trace uniform = run_page(*task.problem, nice(20, 2), cfg);
  CHECK(uniform.selected_iteration >= 0);
  CHECK(uniform.selected_iteration < 1000);

  CHECK(monitor_iterations({0, 0}, 1000).size() == 501);
  CHECK(monitor_iterations({250, 0}, 1000) == std::vector<std::int64_t>{0, 250, 500, 750, 1000});
  CHECK(monitor_iterations({0, 2.0}, 10) == std::vector<std::int64_t>{0, 1, 2, 4, 8, 10});
  CHECK_THROWS_AS(monitor_iterations({0, 0.5}, 10), InvalidArgument);

  Trace t;
  t.records = {{0, 10, 1.0}, {1, 12, 0.5}, {2, 14, 0.01}};
  CHECK(calls_to_reach(t, 0.5) == 12);
  CHECK(calls_to_reach(t, 0.001) == std::nullopt);
}

TEST_CASE("nonconvex bound on the selected iterate") {
  const QuadraticTask task = gen_controlled_lpm(200, 6, 0.01, 0.5, 9);
  const auto& problem = *task.problem;
  const Vector w = Vector::Constant(200, 1.0 / 200);
  const WeightedConstants c = sampling_constants(problem, w, ConstantsMode::Exact);
  const SamplingSpec spec = uniform_with_replacement(200, 1);
  const double p = default_p(1, 200);
  const double gamma = stepsize_nonconvex(problem.smoothness().L_minus, spec.A, spec.B, c.L_plus_w_sq, c.L_pm_w_sq, p);
  const double delta0 = problem.objective(problem.initial_point()) - *problem.optimal_value();
  const std::int64_t T = iteration_budget(delta0, 1e-2, gamma);
  double mean = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    mean += run_page(problem, spec, config(gamma, p, T, seed)).selected_grad_norm_sq / 10;
  CHECK(mean <= 1.5 * 2 * delta0 / (gamma * double(T)));
}
