#include "pagesamp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace pagesamp::harness {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  return out;
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

void print_plan(std::ostream& out, const PreparedProblem& prepared, const MethodPlan& plan) {
  out << "problem      " << prepared.description << '\n'
      << "method       " << to_string(plan.method) << " (" << to_string(plan.spec.kind) << ")\n"
      << "L_minus      " << num(plan.L_minus) << '\n'
      << "L_plus_w^2   " << num(plan.L_plus_w_sq) << '\n'
      << "L_pm_w^2     " << num(plan.L_pm_w_sq) << '\n'
      << "variance     " << num(plan.variance) << '\n'
      << "cardinality  " << num(plan.cardinality) << '\n'
      << "gamma        " << num(plan.gamma) << '\n'
      << "p            " << num(plan.p) << '\n'
      << "delta0       " << num(plan.delta0) << '\n'
      << "iterations   " << plan.iterations << '\n'
      << "pred. calls  " << num(plan.predicted_calls) << '\n';
}

void write_run_outputs(const fs::path& dir, const MethodPlan& plan, const std::vector<SeedResult>& results,
                       double epsilon) {
  fs::create_directories(dir);
  std::vector<const Trace*> traces;
  for (const auto& r : results) {
    auto out = open_out(dir / ("seed_" + std::to_string(r.seed) + ".csv"));
    write_trace_csv(out, r.trace);
    traces.push_back(&r.trace);
  }
  auto agg = open_out(dir / "aggregate.csv");
  write_aggregate_csv(agg, aggregate(traces));
  auto summary = open_out(dir / "summary.csv");
  summary << "seed,gamma,p,iterations,total_calls,refreshes,selected_grad_norm_sq,final_grad_norm_sq,calls_to_eps\n";
  for (const auto& r : results) {
    const auto reach = calls_to_reach(r.trace, epsilon);
    summary << r.seed << ',' << plan.gamma << ',' << plan.p << ',' << plan.iterations << ',' << r.trace.total_calls
            << ',' << r.trace.refreshes << ',' << r.trace.selected_grad_norm_sq << ','
            << r.trace.records.back().grad_norm_sq << ',' << (reach ? std::to_string(*reach) : "") << '\n';
  }
}

ConstantsRow make_row(const std::string& name, double L_minus, double A, double B, const WeightedConstants& c,
                      double cardinality, Index ground, std::optional<double> delta0, double epsilon) {
  ConstantsRow row;
  row.name = name;
  row.L_plus_w_sq = c.L_plus_w_sq;
  row.L_pm_w_sq = c.L_pm_w_sq;
  row.cardinality = cardinality;
  row.p = default_p(cardinality, ground);
  row.gamma = stepsize_nonconvex(L_minus, A, B, c.L_plus_w_sq, c.L_pm_w_sq, row.p);
  const double variance = (A - B) * c.L_plus_w_sq + B * c.L_pm_w_sq;
  row.leading_term = std::max(cardinality * L_minus, std::sqrt(double(ground) * cardinality * variance));
  if (delta0 && *delta0 > 0) {
    row.iterations = iteration_budget(*delta0, epsilon, row.gamma);
    row.predicted_calls = expected_complexity(ground, cardinality, *row.iterations);
  }
  return row;
}

}  // namespace

ConstantsReport compute_constants(const ExperimentConfig& cfg, const PreparedProblem& prepared) {
  ConstantsReport report;
  std::shared_ptr<const Problem> single = prepared.problem;
  std::optional<GroupedProblem> grouped = prepared.grouped;
  if (prepared.fixture) {
    single = prepared.fixture->problem;
    if (!grouped) grouped = prepared.fixture->grouped;
  } else if (prepared.grouped) {
    single = prepared.grouped->flattened();
  }
  const Problem& problem = *single;
  const Index n = problem.size();
  report.smoothness = problem.smoothness();
  const double L_minus = report.smoothness.L_minus;
  const Vector uniform = Vector::Constant(n, 1.0 / double(n));
  Rng rng = make_rng(cfg.seed, 7);
  report.empirical_pm_sq = empirical_hessian_variance(problem, uniform, 200, rng);

  std::optional<double> delta0;
  if (cfg.delta0) {
    delta0 = cfg.delta0;
  } else if (const auto f_star = problem.optimal_value()) {
    delta0 = problem.objective(problem.initial_point()) - *f_star;
  }

  const Index tau = std::min(cfg.tau, n);
  const SamplingSpec uwr = uniform_with_replacement(n, tau);
  const WeightedConstants uc = sampling_constants(problem, uwr.w, cfg.constants);
  report.rows.push_back(make_row("vanilla", L_minus, uwr.A, 0, uc, uwr.expected_cardinality, n, delta0, cfg.epsilon));
  report.rows.push_back(
      make_row("uniform-new", L_minus, uwr.A, uwr.B, uc, uwr.expected_cardinality, n, delta0, cfg.epsilon));
  if (report.smoothness.L.sum() > 0) {
    // Importance constants with q proportional to L; zero-curvature components get zero weight,
    // which a sampler cannot draw from but the constants accept.
    const Vector q = report.smoothness.L / report.smoothness.L.sum();
    const double a = 1.0 / double(tau);
    const WeightedConstants ic = sampling_constants(problem, q, cfg.constants);
    report.rows.push_back(make_row("importance", L_minus, a, a, ic, double(tau), n, delta0, cfg.epsilon));
    report.rows.push_back(make_row("importance-plus-only", L_minus, a, 0, ic, double(tau), n, delta0, cfg.epsilon));
  }
  const SamplingSpec ns = nice(n, tau);
  report.rows.push_back(
      make_row("nice", L_minus, ns.A, ns.B, sampling_constants(problem, ns.w, cfg.constants), ns.expected_cardinality, n,
               delta0, cfg.epsilon));

  {
    // Gradient descent: refresh every step.
    ConstantsRow gd;
    gd.name = "full-batch";
    gd.cardinality = double(n);
    gd.p = 1;
    gd.gamma = stepsize_nonconvex(L_minus, 0, 0, 0, 0, 1);
    gd.leading_term = double(n) * L_minus;
    if (delta0 && *delta0 > 0) {
      gd.iterations = iteration_budget(*delta0, cfg.epsilon, gd.gamma);
      gd.predicted_calls = expected_calls(n, double(n), 1, *gd.iterations);
    }
    report.rows.push_back(gd);
  }

  if (grouped) {
    // Every client once, one point per client without replacement.
    const SamplingSpec outer = full_batch(grouped->clients());
    std::vector<SamplingSpec> inner;
    std::vector<Vector> inner_w;
    double cardinality = 0;
    for (Index i = 0; i < grouped->clients(); ++i) {
      inner.push_back(nice(grouped->client_size(i), std::min(cfg.tau_points, grouped->client_size(i))));
      inner_w.push_back(inner.back().w);
      cardinality += inner.back().expected_cardinality;
    }
    const auto client = grouped->client_constants(inner_w, cfg.constants);
    const ComposedVariance composed = compose_variance(outer, inner, client, 0, 0);
    const Index ground = grouped->total_points();
    ConstantsRow row;
    row.name = "stratified";
    row.cardinality = cardinality;
    row.p = default_p(cardinality, ground);
    row.gamma = stepsize_composed(L_minus, composed, row.p);
    row.leading_term = std::max(cardinality * L_minus, std::sqrt(double(ground) * cardinality * composed.effective));
    double mean_pm = 0;
    for (const auto& c : client) mean_pm += c.L_pm_w_sq / double(client.size());
    row.L_pm_w_sq = mean_pm;
    if (delta0 && *delta0 > 0) {
      row.iterations = iteration_budget(*delta0, cfg.epsilon, row.gamma);
      row.predicted_calls = expected_complexity(ground, cardinality, *row.iterations);
    }
    report.rows.push_back(row);
  }

  auto lead = [&](const std::string& name) -> std::optional<double> {
    for (const auto& r : report.rows)
      if (r.name == name) return r.leading_term;
    return std::nullopt;
  };
  auto ratio = [&](const std::string& a, const std::string& b) {
    const auto x = lead(a), y = lead(b);
    if (x && y && *y > 0) report.ratios[a + "/" + b] = *x / *y;
  };
  ratio("uniform-new", "vanilla");
  ratio("importance", "vanilla");
  ratio("importance-plus-only", "vanilla");
  ratio("nice", "vanilla");
  ratio("stratified", "uniform-new");
  ratio("stratified", "vanilla");
  return report;
}

int cmd_generate(const Settings& settings, std::ostream& out) {
  const ExperimentConfig cfg = make_config(settings);
  if (!cfg.generator) throw ConfigError({"generate needs kind (lpm or li)"});
  const PreparedProblem prepared = prepare_problem(cfg);
  const QuadraticTask& task = *prepared.task;
  fs::path path = settings.has("out")
                      ? fs::path(settings.get("out"))
                      : fs::path(default_output_dir()) / ("task_" + to_string(task.meta.kind) + "_n" +
                                                          std::to_string(cfg.n) + "_s" + num(cfg.s) + "_seed" +
                                                          std::to_string(cfg.seed) + ".txt");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_task(path.string(), task);

  const auto& problem = *task.problem;
  const SmoothnessReport smooth = problem.smoothness();
  const Index n = problem.size();
  const Vector uniform = Vector::Constant(n, 1.0 / double(n));
  const auto exact = sampling_constants(problem, uniform, ConstantsMode::Exact);
  const auto bound = sampling_constants(problem, uniform, ConstantsMode::ComponentBound);
  Rng rng = make_rng(cfg.seed, 7);
  const double empirical = empirical_hessian_variance(problem, uniform, 200, rng);
  out << "wrote        " << path.string() << '\n'
      << "constants    " << to_string(smooth.method) << '\n'
      << "L_minus      " << num(smooth.L_minus) << '\n'
      << "L_i min/mean/max " << num(smooth.L.minCoeff()) << ' ' << num(smooth.L.mean()) << ' '
      << num(smooth.L.maxCoeff()) << '\n'
      << "L_plus^2     " << num(exact.L_plus_w_sq) << " (bound " << num(bound.L_plus_w_sq) << ")\n"
      << "L_pm^2       " << num(exact.L_pm_w_sq) << " (bound " << num(bound.L_pm_w_sq) << ", sampled lower "
      << num(empirical) << ")\n"
      << "mu           " << num(task.problem->strong_convexity()) << '\n';
  if (const auto f_star = problem.optimal_value()) out << "f_star       " << num(*f_star) << '\n';
  return Success;
}

int cmd_run(const Settings& settings, std::ostream& out) {
  const ExperimentConfig cfg = make_config(settings);
  const PreparedProblem prepared = prepare_problem(cfg);
  const MethodPlan plan = plan_method(cfg, prepared);
  print_plan(out, prepared, plan);
  const auto results = run_seeds(prepared, plan, cfg);
  write_run_outputs(cfg.out, plan, results, cfg.epsilon);
  std::vector<double> finals;
  for (const auto& r : results) finals.push_back(r.trace.selected_grad_norm_sq);
  out << "median |grad f(x_out)|^2 " << num(quantile(finals, 0.5)) << " over " << results.size() << " seeds\n"
      << "outputs      " << cfg.out << '\n';
  return Success;
}

int cmd_sweep(const Settings& settings, std::ostream& out) {
  if (settings.grid.empty()) throw ConfigError({"sweep needs at least one grid entry"});
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& [key, list] : settings.grid) {
    auto values = split_list(list);
    if (values.empty()) throw ConfigError({"grid " + key + ": empty list"});
    axes.emplace_back(key, std::move(values));
  }
  // Validate every cell before running any.
  std::vector<Settings> cells(1, settings);
  for (const auto& [key, values] : axes) {
    std::vector<Settings> next;
    for (const auto& c : cells)
      for (const auto& v : values) {
        Settings s = c;
        s.set(key, v);
        next.push_back(std::move(s));
      }
    cells = std::move(next);
  }
  std::vector<std::string> problems;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    try {
      make_config(cells[k]);
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back("cell " + std::to_string(k) + ": " + p);
    }
  }
  if (!problems.empty()) throw ConfigError(problems);

  const fs::path root = make_config(settings).out;
  fs::create_directories(root);
  auto longform = open_out(root / "sweep.csv");
  longform << "cell,method,s,tau,tau_clients,tau_points,seed,gamma,p,iterations,total_calls,calls_to_eps,"
              "final_grad_norm_sq\n";
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const ExperimentConfig cfg = make_config(cells[k]);
    std::string label = "cell_" + std::to_string(k);
    for (const auto& [key, values] : axes) label += "_" + key + "=" + cells[k].get(key);
    const PreparedProblem prepared = prepare_problem(cfg);
    const MethodPlan plan = plan_method(cfg, prepared);
    out << label << ": gamma " << num(plan.gamma) << " p " << num(plan.p) << " T " << plan.iterations << '\n';
    const auto results = run_seeds(prepared, plan, cfg);
    write_run_outputs(root / label, plan, results, cfg.epsilon);
    for (const auto& r : results) {
      const auto reach = calls_to_reach(r.trace, cfg.epsilon);
      longform << k << ',' << to_string(cfg.method) << ',' << cfg.s << ',' << cfg.tau << ',' << cfg.tau_clients << ','
               << cfg.tau_points << ',' << r.seed << ',' << plan.gamma << ',' << plan.p << ',' << plan.iterations << ','
               << r.trace.total_calls << ',' << (reach ? std::to_string(*reach) : "") << ','
               << r.trace.records.back().grad_norm_sq << '\n';
    }
  }
  out << "outputs      " << root.string() << '\n';
  return Success;
}

int cmd_verify(const Settings& settings, std::ostream& out) {
  Settings local = settings;
  if (!local.has("example") && !local.has("kind") && !local.has("task") && !local.has("dataset"))
    local.set("kind", "lpm");   // only to satisfy the problem-source check
  const ExperimentConfig cfg = make_config(local);
  const std::string which = settings.get("verify");
  const auto instances = std::stoll(settings.get("instances"));
  const auto trials = std::stoll(settings.get("trials"));
  if (instances < 1 || trials < 1000) throw ConfigError({"instances must be >= 1 and trials >= 1000"});

  const std::vector<SamplingKind> kinds = {SamplingKind::UniformWithReplacement, SamplingKind::Importance,
                                           SamplingKind::Nice,        SamplingKind::Independent,
                                           SamplingKind::ExtendedNice, SamplingKind::FullBatch};
  Rng rng = make_rng(cfg.seed, 11);
  auto rand_int = [&](Index lo, Index hi) { return lo + static_cast<Index>(uniform_index(rng, std::uint64_t(hi - lo + 1))); };
  auto random_spec = [&](SamplingKind kind, Index n) {
    SamplingParams params;
    params.tau = rand_int(1, std::max<Index>(1, std::min<Index>(n, 3)));
    params.q = Vector(n);
    params.p = Vector(n);
    for (Index i = 0; i < n; ++i) {
      params.q(i) = 0.1 + uniform01(rng);
      params.p(i) = 0.05 + 0.9 * uniform01(rng);
      params.l.push_back(rand_int(1, 3));
    }
    params.q /= params.q.sum();
    if (kind == SamplingKind::Nice) params.tau = rand_int(1, n);
    return build(kind, params, n);
  };

  bool ok = true;
  for (SamplingKind kind : kinds) {
    if (which != "all" && parse_sampling_kind(which) != kind) continue;
    double worst_gap = 0, worst_bias = 0;
    for (std::int64_t t = 0; t < instances; ++t) {
      const Index n = rand_int(2, 6);
      Matrix a(3, n);
      for (Index i = 0; i < a.size(); ++i) a.data()[i] = standard_normal(rng);
      const SamplingSpec spec = random_spec(kind, n);
      const ExactVariance ev = variance_exact(spec, a);
      worst_gap = std::max(worst_gap, std::abs(ev.rhs_bound - ev.variance) / std::max(1.0, ev.rhs_bound));
      worst_bias = std::max(worst_bias, ev.mean_error);
    }
    const bool pass = worst_gap <= 1e-12 && worst_bias <= 1e-12;
    ok = ok && pass;
    out << "exact " << std::left << std::setw(26) << to_string(kind) << " instances " << instances << "  max |gap| "
        << num(worst_gap) << "  max bias " << num(worst_bias) << "  " << (pass ? "PASS" : "FAIL") << '\n';

    const Index n = cfg.n;
    const Index tau = std::min(cfg.tau, n);
    Matrix a(3, n);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = standard_normal(rng);
    SamplingParams params;
    params.tau = tau;
    params.q = (a.colwise().norm().array() + 0.1).transpose();
    params.q /= params.q.sum();
    params.p = Vector::Constant(n, std::min(0.9, double(tau) / double(n)));
    params.l.assign(std::size_t(n), 1);
    const MonteCarloVariance mc = variance_mc(build(kind, params, n), a, trials, rng);
    const bool mc_pass = !mc.biased && !mc.violated;
    ok = ok && mc_pass;
    out << "mc    " << std::left << std::setw(26) << to_string(kind) << " n " << n << " tau " << tau << "  bias "
        << num(mc.mean_error) << "  variance " << num(mc.variance_est) << " <= " << num(mc.rhs_bound) << "  "
        << (mc_pass ? "PASS" : "FAIL") << '\n';
  }

  if (which == "all") {
    const Index n = std::max<Index>(2, std::min<Index>(cfg.n, 1000));
    const SamplingSpec u = uniform_with_replacement(n, std::min(cfg.tau, n));
    const SamplingSpec q = importance(Vector::Constant(n, 1.0 / double(n)), std::min(cfg.tau, n));
    const bool same = u.A == q.A && u.B == q.B && (u.w - q.w).cwiseAbs().maxCoeff() <= 1e-15 &&
                      u.expected_cardinality == q.expected_cardinality;
    ok = ok && same;
    out << "importance with uniform q matches uniform-with-replacement constants  " << (same ? "PASS" : "FAIL")
        << '\n';
  }

  if (which == "all") {
    double worst = std::numeric_limits<double>::infinity();
    for (std::int64_t t = 0; t < instances; ++t) {
      std::vector<Matrix> vectors;
      std::vector<SamplingSpec> inner;
      for (int i = 0; i < 2; ++i) {
        Matrix v(3, 2);
        for (Index k = 0; k < v.size(); ++k) v.data()[k] = standard_normal(rng);
        vectors.push_back(v);
        inner.push_back(uniform_with_replacement(2, 1));
      }
      const ComposedExact ce = composed_variance_exact(uniform_with_replacement(2, 1), inner, vectors);
      worst = std::min(worst, ce.rhs_bound - ce.variance);
    }
    const bool pass = worst >= -1e-12;
    ok = ok && pass;
    out << "composed 2x2 uniform tau=1  min gap " << num(worst) << "  " << (pass ? "PASS" : "FAIL") << '\n';
  }
  return ok ? Success : VerificationFailure;
}

int cmd_constants(const Settings& settings, std::ostream& out) {
  const ExperimentConfig cfg = make_config(settings);
  const PreparedProblem prepared = prepare_problem(cfg);
  const ConstantsReport report = compute_constants(cfg, prepared);
  const auto& sm = report.smoothness;
  out << "problem      " << prepared.description << '\n'
      << "constants    " << to_string(sm.method) << '\n'
      << "L_minus      " << num(sm.L_minus) << '\n'
      << "L_i min/mean/max " << num(sm.L.minCoeff()) << ' ' << num(sm.L.mean()) << ' ' << num(sm.L.maxCoeff()) << '\n';
  if (report.empirical_pm_sq) out << "sampled L_pm^2 lower bound " << num(*report.empirical_pm_sq) << '\n';
  out << '\n'
      << std::left << std::setw(22) << "sampling" << std::setw(16) << "L_plus_w^2" << std::setw(16) << "L_pm_w^2"
      << std::setw(16) << "gamma" << std::setw(16) << "p" << std::setw(10) << "E|S|" << std::setw(16) << "leading"
      << std::setw(14) << "T" << "calls\n";
  for (const auto& r : report.rows) {
    out << std::left << std::setw(22) << r.name << std::setw(16) << num(r.L_plus_w_sq) << std::setw(16)
        << num(r.L_pm_w_sq) << std::setw(16) << num(r.gamma) << std::setw(16) << num(r.p) << std::setw(10)
        << num(r.cardinality) << std::setw(16) << num(r.leading_term) << std::setw(14)
        << (r.iterations ? std::to_string(*r.iterations) : "-") << (r.predicted_calls ? num(*r.predicted_calls) : "-")
        << '\n';
  }
  out << '\n';
  for (const auto& [name, value] : report.ratios) out << "ratio " << std::left << std::setw(34) << name << num(value) << '\n';
  if (prepared.fixture) {
    out << "example " << cfg.example << " closed-form ratio " << num(prepared.fixture->constants.complexity_ratio) << '\n';
    if (cfg.example == 3)
      out << "example 3 sqrt(g)/sqrt(n) " << num(std::sqrt(double(cfg.g)) / std::sqrt(double(cfg.g * cfg.m))) << '\n';
  }
  return Success;
}

}  // namespace pagesamp::harness
