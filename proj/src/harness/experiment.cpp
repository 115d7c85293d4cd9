#include "pagesamp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace pagesamp::harness {

namespace {

SamplingSpec batch_spec(SamplingKind kind, Index n, Index tau) {
  switch (kind) {
    case SamplingKind::UniformWithReplacement: return uniform_with_replacement(n, tau);
    case SamplingKind::Nice: return nice(n, std::min(tau, n));
    case SamplingKind::FullBatch: return full_batch(n);
    default: throw Unsupported("composed runs support uniform, nice and full-batch samplings");
  }
}

std::vector<Index> lipschitz_repeats(const Vector& L) {
  double floor = 0;
  for (Index i = 0; i < L.size(); ++i)
    if (L(i) > 0 && (floor == 0 || L(i) < floor)) floor = L(i);
  std::vector<Index> l(static_cast<std::size_t>(L.size()), 1);
  if (floor == 0) return l;
  for (Index i = 0; i < L.size(); ++i)
    l[static_cast<std::size_t>(i)] = std::clamp<Index>(static_cast<Index>(std::llround(L(i) / floor)), 1, 1000);
  return l;
}

std::optional<double> strong_convexity(const PreparedProblem& prepared) {
  const Problem* base = prepared.grouped ? &prepared.grouped->base() : prepared.problem.get();
  if (const auto* q = dynamic_cast<const QuadraticProblem*>(base)) {
    if (q->strong_convexity() > 0) return q->strong_convexity();
  }
  return std::nullopt;
}

double initial_gap(const ExperimentConfig& cfg, const Problem& problem) {
  if (cfg.delta0) return *cfg.delta0;
  const double f0 = problem.objective(problem.initial_point());
  if (const auto f_star = problem.optimal_value()) return f0 - *f_star;
  // Both loss and penalty are nonnegative, so f* >= 0.
  if (problem.kind() == ProblemKind::Logistic || problem.kind() == ProblemKind::Grouped) {
    if (f0 > 0) return f0;
  }
  throw InvalidArgument("delta0 is unknown for this problem; set delta0 or iterations");
}

void finish_plan(MethodPlan& plan, const ExperimentConfig& cfg, const Problem& problem) {
  if (cfg.iterations) {
    plan.iterations = *cfg.iterations;
    try {
      plan.delta0 = initial_gap(cfg, problem);
    } catch (const InvalidArgument&) {
      plan.delta0 = 0;
    }
  } else {
    plan.delta0 = initial_gap(cfg, problem);
    plan.iterations = iteration_budget(plan.delta0, cfg.epsilon, plan.gamma);
  }
  plan.predicted_calls = expected_calls(plan.ground, plan.cardinality, plan.p, plan.iterations);
}

}  // namespace

PreparedProblem prepare_problem(const ExperimentConfig& cfg) {
  PreparedProblem out;
  const bool composed = cfg.method == Method::Composed;
  if (cfg.generator || !cfg.task_path.empty()) {
    if (cfg.generator) {
      out.task = *cfg.generator == TaskKind::ControlledLpm ? gen_controlled_lpm(cfg.n, cfg.d, cfg.lambda, cfg.s, cfg.seed)
                                                           : gen_controlled_li(cfg.n, cfg.d, cfg.s, cfg.seed);
    } else {
      out.task = load_task(cfg.task_path);
    }
    const auto& meta = out.task->meta;
    out.description = to_string(meta.kind) + " n=" + std::to_string(meta.n) + " d=" + std::to_string(meta.d);
    out.problem = out.task->problem;
    if (cfg.groups > 0) {
      out.grouped = stratify(out.problem, cfg.groups, cfg.stratify);
      out.description += " groups=" + std::to_string(cfg.groups);
    }
  } else if (!cfg.dataset_path.empty()) {
    const SparseDataset data = load_libsvm(cfg.dataset_path);
    out.description = cfg.dataset_path + " rows=" + std::to_string(data.rows());
    if (cfg.clients > 0) {
      out.grouped = shard(data, cfg.clients, cfg.shard_seed, cfg.lambda);
      out.description += " clients=" + std::to_string(cfg.clients);
    } else {
      out.problem = logistic_problem(data, cfg.lambda);
    }
  } else {
    out.fixture = example_fixture(cfg.example, ExampleParams{cfg.n, cfg.a, cfg.b, cfg.g, cfg.m});
    out.problem = out.fixture->problem;
    out.description = "example " + std::to_string(cfg.example);
    if (composed && out.fixture->grouped) out.grouped = out.fixture->grouped;
  }
  if (out.grouped) out.problem = out.grouped->client_level();
  if (composed && !out.grouped) throw InvalidArgument("method composed needs a two-level problem");
  return out;
}

MethodPlan plan_method(const ExperimentConfig& cfg, const PreparedProblem& prepared) {
  const Problem& problem = *prepared.problem;
  const Index n = problem.size();
  MethodPlan plan;
  plan.method = cfg.method;
  const SmoothnessReport smooth = problem.smoothness();
  plan.L_minus = smooth.L_minus;

  if (cfg.method == Method::Composed) {
    const GroupedProblem& grouped = *prepared.grouped;
    plan.spec = batch_spec(cfg.outer, n, cfg.tau_clients);
    std::vector<Vector> inner_w;
    double cardinality = 0;
    for (Index i = 0; i < n; ++i) {
      plan.inner.push_back(batch_spec(cfg.inner, grouped.client_size(i), cfg.tau_points));
      inner_w.push_back(plan.inner.back().w);
      cardinality += plan.inner.back().expected_cardinality;
    }
    plan.cardinality = plan.spec.expected_cardinality * cardinality / double(n);
    const WeightedConstants outer = sampling_constants(problem, plan.spec.w, cfg.constants);
    plan.L_plus_w_sq = outer.L_plus_w_sq;
    plan.L_pm_w_sq = outer.L_pm_w_sq;
    const ComposedVariance composed = compose_variance(plan.spec, plan.inner, grouped.client_constants(inner_w, cfg.constants),
                                                       outer.L_plus_w_sq, outer.L_pm_w_sq);
    plan.variance = composed.effective;
    plan.ground = grouped.total_points();
    plan.p = cfg.p.value_or(default_p(plan.cardinality, plan.ground));
    if (cfg.gamma) {
      plan.gamma = *cfg.gamma;
    } else {
      plan.gamma = stepsize_composed(plan.L_minus, composed, plan.p);
      if (cfg.pl) {
        const auto mu = cfg.mu ? cfg.mu : strong_convexity(prepared);
        if (!mu) throw InvalidArgument("pl needs mu for this problem");
        const double root = std::sqrt(2 * (1 - plan.p) / plan.p * plan.variance);
        plan.gamma = std::min(1 / (plan.L_minus + root), plan.p / (2 * *mu));
      }
    }
    finish_plan(plan, cfg, problem);
    return plan;
  }

  double A = 0, B = 0;
  switch (cfg.method) {
    case Method::Vanilla:
    case Method::UniformNew: plan.spec = uniform_with_replacement(n, cfg.tau); break;
    case Method::Importance: plan.spec = importance(optimal_importance_weights(smooth.L), cfg.tau); break;
    case Method::Nice: plan.spec = nice(n, cfg.tau); break;
    case Method::Independent:
      plan.spec = independent(Vector::Constant(n, std::min(1.0, double(cfg.tau) / double(n))));
      break;
    case Method::ExtendedNice:
      plan.spec = extended_nice(cfg.lipschitz_repeats ? lipschitz_repeats(smooth.L) : std::vector<Index>(std::size_t(n), 1),
                                cfg.tau);
      break;
    case Method::FullBatch: plan.spec = full_batch(n); break;
    case Method::Composed: break;
  }
  A = plan.spec.A;
  B = cfg.method == Method::Vanilla ? 0.0 : plan.spec.B;
  const WeightedConstants c = sampling_constants(problem, plan.spec.w, cfg.constants);
  plan.L_plus_w_sq = c.L_plus_w_sq;
  plan.L_pm_w_sq = c.L_pm_w_sq;
  plan.variance = (A - B) * c.L_plus_w_sq + B * c.L_pm_w_sq;
  plan.cardinality = plan.spec.expected_cardinality;
  plan.ground = n;
  plan.p = cfg.p.value_or(default_p(plan.cardinality, n));
  if (cfg.gamma) {
    plan.gamma = *cfg.gamma;
  } else if (cfg.pl) {
    const auto mu = cfg.mu ? cfg.mu : strong_convexity(prepared);
    if (!mu) throw InvalidArgument("pl needs mu for this problem");
    plan.gamma = stepsize_pl(plan.L_minus, A, B, c.L_plus_w_sq, c.L_pm_w_sq, plan.p, *mu);
  } else {
    plan.gamma = stepsize_nonconvex(plan.L_minus, A, B, c.L_plus_w_sq, c.L_pm_w_sq, plan.p);
  }
  finish_plan(plan, cfg, problem);
  return plan;
}

Trace run_seed(const PreparedProblem& prepared, const MethodPlan& plan, const ExperimentConfig& cfg,
               std::uint64_t seed) {
  PageConfig pc;
  pc.gamma = plan.gamma;
  pc.p = plan.p;
  pc.iterations = plan.iterations;
  pc.seed = seed;
  pc.output_rule = cfg.output_rule;
  pc.monitor = cfg.monitor;
  pc.accounting = cfg.accounting;
  if (plan.method == Method::Composed) return run_page_composed(*prepared.grouped, plan.spec, plan.inner, pc);
  return run_page(*prepared.problem, plan.spec, pc);
}

std::vector<SeedResult> run_seeds(const PreparedProblem& prepared, const MethodPlan& plan,
                                  const ExperimentConfig& cfg) {
  const std::size_t jobs = cfg.seeds.size();
  std::vector<SeedResult> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, jobs));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < jobs; k = next++) {
      try {
        results[k] = {cfg.seeds[k], run_seed(prepared, plan, cfg, cfg.seeds[k])};
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace pagesamp::harness
