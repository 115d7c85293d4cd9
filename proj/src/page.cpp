#include "pagesamp/page.hpp"

#include "pagesamp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pagesamp {

std::string to_string(OutputRule rule) {
  switch (rule) {
    case OutputRule::UniformRandomIterate: return "uniform-random-iterate";
    case OutputRule::LastIterate: return "last-iterate";
    case OutputRule::BestGradientIterate: return "best-gradient-iterate";
  }
  return "unknown";
}

OutputRule parse_output_rule(const std::string& text) {
  if (text == "uniform-random-iterate" || text == "uniform") return OutputRule::UniformRandomIterate;
  if (text == "last-iterate" || text == "last") return OutputRule::LastIterate;
  if (text == "best-gradient-iterate" || text == "best") return OutputRule::BestGradientIterate;
  throw InvalidArgument("unknown output rule '" + text + "'");
}

static void check_p(double p) {
  if (!(p > 0 && p <= 1)) throw InvalidArgument("refresh probability must lie in (0, 1]");
}

static double variance_term(double A, double B, double L_plus_w_sq, double L_pm_w_sq) {
  if (A < 0 || B < 0 || L_plus_w_sq < 0 || L_pm_w_sq < 0) throw InvalidArgument("constants must be nonnegative");
  return std::max(0.0, (A - B) * L_plus_w_sq + B * L_pm_w_sq);
}

static double inverse_step(double L_minus, double scaled_variance) {
  if (L_minus < 0) throw InvalidArgument("L_minus must be nonnegative");
  const double denom = L_minus + std::sqrt(scaled_variance);
  if (!(denom > 0)) throw InvalidArgument("stepsize is unbounded: all smoothness constants are zero");
  return 1.0 / denom;
}

double stepsize_nonconvex(double L_minus, double A, double B, double L_plus_w_sq, double L_pm_w_sq, double p) {
  check_p(p);
  return inverse_step(L_minus, (1 - p) / p * variance_term(A, B, L_plus_w_sq, L_pm_w_sq));
}

double stepsize_pl(double L_minus, double A, double B, double L_plus_w_sq, double L_pm_w_sq, double p, double mu) {
  check_p(p);
  if (!(mu > 0)) throw InvalidArgument("PL constant must be positive");
  const double first = inverse_step(L_minus, 2 * (1 - p) / p * variance_term(A, B, L_plus_w_sq, L_pm_w_sq));
  return std::min(first, p / (2 * mu));
}

double stepsize_composed(double L_minus, const ComposedVariance& composed, double p) {
  check_p(p);
  if (composed.effective < 0) throw InvalidArgument("composed variance must be nonnegative");
  return inverse_step(L_minus, (1 - p) / p * composed.effective);
}

double default_p(double cardinality, Index n) {
  if (!(cardinality > 0)) throw InvalidArgument("cardinality must be positive");
  return cardinality / (cardinality + double(n));
}

std::int64_t iteration_budget(double delta0, double epsilon, double gamma) {
  if (!(delta0 > 0) || !(epsilon > 0) || !(gamma > 0)) throw InvalidArgument("budget inputs must be positive");
  const double ratio = 2 * delta0 / (gamma * epsilon);
  if (!(ratio < 9e18)) throw InvalidArgument("iteration budget overflows");
  auto T = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(ratio)));
  while (T > 1 && 2 * delta0 / (gamma * double(T - 1)) <= epsilon) --T;
  while (2 * delta0 / (gamma * double(T)) > epsilon) ++T;
  return T;
}

double expected_complexity(Index n, double cardinality, std::int64_t T) {
  return double(n) + 2 * cardinality * double(T);
}

double expected_calls(Index n, double cardinality, double p, std::int64_t T) {
  return double(n) + (p * double(n) + (1 - p) * cardinality) * double(T);
}

std::vector<std::int64_t> monitor_iterations(const MonitorSchedule& schedule, std::int64_t T) {
  std::vector<std::int64_t> out{0};
  if (T <= 0) return out;
  if (schedule.growth > 0) {
    if (!(schedule.growth > 1)) throw InvalidArgument("monitor growth must exceed 1");
    std::int64_t t = 1;
    while (t < T) {
      out.push_back(t);
      t = std::max(t + 1, static_cast<std::int64_t>(std::ceil(double(t) * schedule.growth)));
    }
  } else {
    const std::int64_t every = schedule.every > 0 ? schedule.every : std::max<std::int64_t>(1, T / 500);
    for (std::int64_t t = every; t < T; t += every) out.push_back(t);
  }
  out.push_back(T);
  return out;
}

std::optional<std::int64_t> calls_to_reach(const Trace& trace, double epsilon) {
  for (const auto& r : trace.records)
    if (r.grad_norm_sq <= epsilon) return r.calls;
  return std::nullopt;
}

namespace {

/// Shared loop. `correction(rng, x_new, x_old, delta)` fills the sampled
/// correction and returns the calls it charged.
template <typename Correction>
Trace run_loop(const Problem& problem, std::int64_t refresh_calls, const PageConfig& cfg, Correction&& correction) {
  if (!(cfg.gamma > 0) || !std::isfinite(cfg.gamma)) throw InvalidArgument("stepsize must be positive and finite");
  check_p(cfg.p);
  if (cfg.iterations < 0) throw InvalidArgument("iteration count must be nonnegative");
  const Index d = problem.dim();
  const std::int64_t T = cfg.iterations;

  Vector x = cfg.x0 ? *cfg.x0 : problem.initial_point();
  check_point(problem, x);
  const std::optional<double> f_star = cfg.f_star ? cfg.f_star : problem.optimal_value();

  Rng rng = make_rng(cfg.seed, 0);
  Rng select_rng = make_rng(cfg.seed, 1);

  Trace trace;
  trace.gamma = cfg.gamma;
  trace.p = cfg.p;
  trace.iterations = T;

  Vector g(d), x_new(d), delta(d), exact(d);
  problem.gradient(x, g);
  std::int64_t calls = refresh_calls;

  const std::vector<std::int64_t> monitors = monitor_iterations(cfg.monitor, T);
  std::size_t next_monitor = 0;
  std::int64_t select_at = 0;
  if (cfg.output_rule == OutputRule::UniformRandomIterate && T > 0)
    select_at = static_cast<std::int64_t>(uniform_index(select_rng, std::uint64_t(T)));
  trace.selected_point = x;
  trace.selected_iteration = 0;
  double best_grad = std::numeric_limits<double>::infinity();
  double best_objective = std::numeric_limits<double>::infinity();
  const double f0 = problem.objective(x);
  if (!std::isfinite(f0)) throw Divergence(0);

  auto record = [&](std::int64_t t, bool refreshed) {
    problem.gradient(x, exact);
    TraceRecord r;
    r.iteration = t;
    r.calls = calls;
    r.grad_norm_sq = exact.squaredNorm();
    r.objective = problem.objective(x);
    if (!std::isfinite(r.objective) || !std::isfinite(r.grad_norm_sq)) throw Divergence(t);
    r.refreshed = refreshed;
    r.estimator_error_sq = (g - exact).squaredNorm();
    if (f_star) r.lyapunov = r.objective - *f_star + cfg.gamma / (2 * cfg.p) * r.estimator_error_sq;
    best_objective = std::min(best_objective, r.objective);
    if (cfg.output_rule == OutputRule::BestGradientIterate && r.grad_norm_sq < best_grad) {
      best_grad = r.grad_norm_sq;
      trace.selected_point = x;
      trace.selected_iteration = t;
    }
    trace.records.push_back(r);
  };

  record(0, true);
  ++next_monitor;
  for (std::int64_t t = 0; t < T; ++t) {
    x_new = x - cfg.gamma * g;
    if (!x_new.allFinite()) throw Divergence(t + 1);
    const bool refresh = uniform01(rng) < cfg.p;
    if (refresh) {
      problem.gradient(x_new, g);
      calls += refresh_calls;
      ++trace.refreshes;
    } else {
      calls += correction(rng, x_new, x, delta);
      g += delta;
    }
    x.swap(x_new);
    if (t + 1 == select_at) {
      trace.selected_point = x;
      trace.selected_iteration = t + 1;
    }
    if (next_monitor < monitors.size() && monitors[next_monitor] == t + 1) {
      record(t + 1, refresh);
      ++next_monitor;
    }
  }

  trace.final_point = x;
  if (cfg.output_rule == OutputRule::LastIterate) {
    trace.selected_point = x;
    trace.selected_iteration = T;
  }
  trace.total_calls = calls;
  trace.selected_grad_norm_sq = full_grad(problem, trace.selected_point).squaredNorm();
  trace.delta0 = f_star ? f0 - *f_star : f0 - best_objective;
  return trace;
}

std::int64_t charge(Index raw, CallAccounting accounting) {
  return accounting == CallAccounting::PerEvaluation ? 2 * std::int64_t(raw) : std::int64_t(raw);
}

}  // namespace

Trace run_page(const Problem& problem, const SamplingSpec& spec, const PageConfig& cfg) {
  if (spec.n != problem.size())
    throw DimensionMismatch("sampling ground set (" + std::to_string(spec.n) + ") differs from component count (" +
                            std::to_string(problem.size()) + ")");
  Sampler sampler(spec);
  Draw d;
  Vector scratch(problem.dim());
  return run_loop(problem, problem.size(), cfg,
                  [&](Rng& rng, const Vector& x_new, const Vector& x_old, Vector& delta) {
                    sampler.draw(rng, d);
                    apply(
                        d,
                        [&](Index i, Eigen::Ref<Vector> buf) { problem.component_gradient_diff(i, x_new, x_old, buf); },
                        delta, scratch);
                    return charge(d.raw_size, cfg.accounting);
                  });
}

Trace run_page_composed(const GroupedProblem& problem, const SamplingSpec& outer,
                        const std::vector<SamplingSpec>& inner, const PageConfig& cfg) {
  check_composition(outer, inner);
  if (outer.n != problem.clients()) throw DimensionMismatch("outer sampling must range over the clients");
  for (Index i = 0; i < problem.clients(); ++i)
    if (inner[static_cast<std::size_t>(i)].n != problem.client_size(i))
      throw DimensionMismatch("inner sampling " + std::to_string(i) + " does not match the client size");
  Sampler outer_sampler(outer);
  std::vector<Sampler> inner_samplers;
  inner_samplers.reserve(inner.size());
  for (const auto& s : inner) inner_samplers.emplace_back(s);
  Draw od, id;
  Vector scratch(problem.dim()), inner_scratch(problem.dim());
  const auto client_level = problem.client_level();
  return run_loop(*client_level, problem.total_points(), cfg,
                  [&](Rng& rng, const Vector& x_new, const Vector& x_old, Vector& delta) {
                    std::int64_t calls = 0;
                    outer_sampler.draw(rng, od);
                    apply(
                        od,
                        [&](Index i, Eigen::Ref<Vector> buf) {
                          inner_samplers[static_cast<std::size_t>(i)].draw(rng, id);
                          calls += charge(id.raw_size, cfg.accounting);
                          apply(
                              id,
                              [&](Index j, Eigen::Ref<Vector> b) { problem.point_gradient_diff(i, j, x_new, x_old, b); },
                              buf, inner_scratch);
                        },
                        delta, scratch);
                    return calls;
                  });
}

}  // namespace pagesamp
