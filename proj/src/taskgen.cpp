#include "pagesamp/taskgen.hpp"

#include "pagesamp/errors.hpp"
#include "pagesamp/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pagesamp {

std::string to_string(TaskKind kind) {
  return kind == TaskKind::ControlledLpm ? "controlled-lpm" : "controlled-li";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "lpm" || text == "controlled-lpm") return TaskKind::ControlledLpm;
  if (text == "li" || text == "controlled-li") return TaskKind::ControlledLi;
  throw InvalidArgument("unknown task kind '" + text + "' (expected lpm or li)");
}

static void check_sizes(Index n, Index d, double s) {
  if (n < 1) throw InvalidArgument("n must be at least 1");
  if (d < 2) throw InvalidArgument("d must be at least 2");
  if (!(s >= 0) || !std::isfinite(s)) throw InvalidArgument("noise scale must be nonnegative");
}

static Vector start_point(Index d) {
  Vector x0 = Vector::Zero(d);
  x0(0) = std::sqrt(double(d));
  return x0;
}

static QuadraticTask assemble(const TaskMetadata& meta, const Vector& scales, double shift,
                              const std::vector<Vector>& b) {
  std::vector<QuadraticComponent> components;
  components.reserve(b.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    components.push_back(QuadraticComponent::stencil(scales(static_cast<Index>(i)), shift, b[i]));
  QuadraticTask task;
  task.meta = meta;
  task.scales = scales;
  task.shift = shift;
  task.problem = std::make_shared<QuadraticProblem>(std::move(components), start_point(meta.d));
  return task;
}

QuadraticTask gen_controlled_lpm(Index n, Index d, double lambda, double s, std::uint64_t seed) {
  check_sizes(n, d, s);
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be nonnegative");
  Rng rng = make_rng(seed);
  Vector scales(n);
  std::vector<Vector> b(static_cast<std::size_t>(n), Vector::Zero(d));
  for (Index i = 0; i < n; ++i) {
    const double nu_s = 1 + s * standard_normal(rng);
    const double nu_b = s * standard_normal(rng);
    scales(i) = nu_s / 4;
    b[static_cast<std::size_t>(i)](0) = nu_s / 4 * (-1 + nu_b);
  }
  const double mean_scale = scales.mean();
  const double shift = lambda - scaled_stencil_min(mean_scale, 0.0, d);
  return assemble({TaskKind::ControlledLpm, n, d, lambda, s, seed}, scales, shift, b);
}

QuadraticTask gen_controlled_li(Index n, Index d, double s, std::uint64_t seed) {
  check_sizes(n, d, s);
  Rng rng = make_rng(seed);
  Vector scales(n);
  std::vector<Vector> b(static_cast<std::size_t>(n), Vector::Zero(d));
  for (Index i = 0; i < n; ++i) {
    const double nu_s = 1 + s * standard_exponential(rng);
    const double nu_b = s * standard_normal(rng);
    scales(i) = nu_s / 4;
    b[static_cast<std::size_t>(i)](0) = -0.25 + nu_b;
  }
  return assemble({TaskKind::ControlledLi, n, d, 0.0, s, seed}, scales, 0.0, b);
}

// --- serialization -----------------------------------------------------------

static std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_task(std::ostream& out, const QuadraticTask& task) {
  const auto& m = task.meta;
  out << "format_version 1\n";
  out << "kind " << to_string(m.kind) << "\n";
  out << "n " << m.n << "\nd " << m.d << "\nlambda " << fmt(m.lambda) << "\ns " << fmt(m.s) << "\nseed " << m.seed
      << "\n";
  out << "shift " << fmt(task.shift) << "\n";
  out << "x0";
  const Vector x0 = task.problem->initial_point();
  for (Index k = 0; k < x0.size(); ++k) out << ' ' << fmt(x0(k));
  out << "\n";
  // One line per component: stencil scale, then b.
  for (Index i = 0; i < m.n; ++i) {
    out << "component " << fmt(task.scales(i));
    const Vector& b = task.problem->component(i).b;
    for (Index k = 0; k < b.size(); ++k) out << ' ' << fmt(b(k));
    out << "\n";
  }
}

QuadraticTask read_task(std::istream& in) {
  TaskMetadata meta;
  double shift = 0;
  Vector x0;
  std::vector<double> scales;
  std::vector<Vector> b;
  bool have_version = false;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto read_vector = [&](Index d) {
      Vector v(d);
      for (Index k = 0; k < d; ++k)
        if (!(ls >> v(k))) throw ParseError("expected " + std::to_string(d) + " values after '" + key + "'", lineno);
      return v;
    };
    if (!have_version) {
      int version = 0;
      if (key != "format_version" || !(ls >> version)) throw ParseError("task file must start with format_version", lineno);
      if (version != 1) throw ParseError("unsupported task format_version " + std::to_string(version), lineno);
      have_version = true;
      continue;
    }
    bool ok = true;
    if (key == "kind") {
      std::string k;
      ok = bool(ls >> k);
      if (ok) meta.kind = parse_task_kind(k);
    } else if (key == "n") {
      ok = bool(ls >> meta.n);
    } else if (key == "d") {
      ok = bool(ls >> meta.d);
    } else if (key == "lambda") {
      ok = bool(ls >> meta.lambda);
    } else if (key == "s") {
      ok = bool(ls >> meta.s);
    } else if (key == "seed") {
      ok = bool(ls >> meta.seed);
    } else if (key == "shift") {
      ok = bool(ls >> shift);
    } else if (key == "x0") {
      if (meta.d < 1) throw ParseError("x0 before d", lineno);
      x0 = read_vector(meta.d);
    } else if (key == "component") {
      if (meta.d < 1) throw ParseError("component before d", lineno);
      double c = 0;
      if (!(ls >> c)) throw ParseError("component line needs a scale", lineno);
      scales.push_back(c);
      b.push_back(read_vector(meta.d));
    } else {
      throw ParseError("unknown key '" + key + "'", lineno);
    }
    if (!ok) throw ParseError("missing value for '" + key + "'", lineno);
  }
  if (!have_version) throw ParseError("empty task file", 0);
  if (static_cast<Index>(scales.size()) != meta.n)
    throw ParseError("expected " + std::to_string(meta.n) + " components, found " + std::to_string(scales.size()), 0);
  Vector sc = Eigen::Map<Vector>(scales.data(), static_cast<Index>(scales.size()));
  QuadraticTask task = assemble(meta, sc, shift, b);
  if (x0.size() == meta.d && x0 != task.problem->initial_point()) {
    std::vector<QuadraticComponent> comps = task.problem->components();
    task.problem = std::make_shared<QuadraticProblem>(std::move(comps), x0);
  }
  return task;
}

void save_task(const std::string& path, const QuadraticTask& task) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_task(out, task);
  if (!out) throw Error("failed writing '" + path + "'");
}

QuadraticTask load_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open task file '" + path + "'");
  return read_task(in);
}

// --- analytic examples ---------------------------------------------------------

static QuadraticComponent scalar_quadratic(double curvature) {
  return QuadraticComponent::from_dense(Matrix::Constant(1, 1, curvature), Vector::Zero(1));
}

ExampleFixture example_fixture(int which, const ExampleParams& params) {
  ExampleFixture fx;
  ExampleConstants& c = fx.constants;
  const Vector x0 = Vector::Ones(1);
  switch (which) {
    case 1: {
      const Index n = params.n;
      const double a = params.a, b = params.b;
      if (n < 2 || n % 2 != 0) throw InvalidArgument("example 1 needs an even n");
      if (a < 0 || b < 0) throw InvalidArgument("example 1 needs a, b >= 0");
      std::vector<QuadraticComponent> comps;
      for (Index i = 0; i < n; ++i) comps.push_back(scalar_quadratic(i < n / 2 ? a + b : b - a));
      fx.problem = std::make_shared<QuadraticProblem>(std::move(comps), x0, ProblemKind::AnalyticExample);
      c.L_minus = b;
      c.L_plus_sq = 0.5 * ((a + b) * (a + b) + (a - b) * (a - b));
      c.L_pm_sq = c.L_plus_sq - b * b;
      c.mean_L = 0.5 * (std::abs(a + b) + std::abs(a - b));
      // Uniform sampling with the new analysis against the original one.
      c.complexity_ratio =
          std::max(std::sqrt(double(n)) * std::sqrt(c.L_pm_sq), c.L_minus) / (std::sqrt(double(n)) * std::sqrt(c.L_plus_sq));
      return fx;
    }
    case 2: {
      const Index n = params.n;
      const double b = params.b;
      if (n < 2) throw InvalidArgument("example 2 needs n >= 2");
      if (b < 0) throw InvalidArgument("example 2 needs b >= 0");
      std::vector<QuadraticComponent> comps;
      for (Index i = 0; i < n; ++i) comps.push_back(scalar_quadratic(i == 0 ? b : 0.0));
      fx.problem = std::make_shared<QuadraticProblem>(std::move(comps), x0, ProblemKind::AnalyticExample);
      c.L_minus = b / double(n);
      c.mean_L = b / double(n);
      c.L_plus_sq = b * b / double(n);
      c.L_pm_sq = c.L_plus_sq - c.L_minus * c.L_minus;
      // Importance sampling with optimal weights against the original analysis.
      c.complexity_ratio = c.mean_L / std::sqrt(c.L_plus_sq);
      return fx;
    }
    case 3: {
      const Index g = params.g, m = params.m;
      const double b1 = params.b;
      if (g < 2 || m < 1) throw InvalidArgument("example 3 needs g >= 2 and m >= 1");
      if (b1 < 0) throw InvalidArgument("example 3 needs b1 >= 0");
      const Index n = g * m;
      std::vector<QuadraticComponent> comps;
      for (Index i = 0; i < n; ++i) comps.push_back(scalar_quadratic(i < m ? b1 : 0.0));
      fx.problem = std::make_shared<QuadraticProblem>(std::move(comps), x0, ProblemKind::AnalyticExample);
      fx.grouped = stratify(fx.problem, g, StratifyRule::Contiguous);
      const double gd = double(g);
      c.L_minus = b1 / gd;
      c.L_plus_sq = b1 * b1 / gd;
      c.L_pm_sq = (1 / gd - 1 / (gd * gd)) * b1 * b1;
      c.mean_L = b1 / gd;
      c.client_L_pm_sq = Vector::Zero(g);
      // Stratified (all groups, inner Nice) against uniform sampling, leading terms:
      // max{sqrt(n) sqrt(mean L_{i,+-}^2), g L_-} / max{sqrt(n) L_+-, L_-}.
      const double group = std::max(0.0, gd * c.L_minus);
      const double uniform = std::max(std::sqrt(double(n)) * std::sqrt(c.L_pm_sq), c.L_minus);
      c.complexity_ratio = group / uniform;
      return fx;
    }
    default: throw InvalidArgument("examples are numbered 1 to 3");
  }
}

// --- stratification ----------------------------------------------------------------

StratifyRule parse_stratify_rule(const std::string& text) {
  if (text == "contiguous") return StratifyRule::Contiguous;
  if (text == "by-li-sorted" || text == "by-li" || text == "sorted") return StratifyRule::ByLipschitz;
  throw InvalidArgument("unknown stratify rule '" + text + "'");
}

GroupedProblem stratify(std::shared_ptr<const Problem> problem, Index g, StratifyRule rule) {
  const Index n = problem->size();
  if (g < 1 || n % g != 0)
    throw InvalidArgument("group count " + std::to_string(g) + " must divide n = " + std::to_string(n));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  if (rule == StratifyRule::ByLipschitz) {
    const Vector L = problem->smoothness().L;
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return L(a) < L(b); });
  }
  const Index m = n / g;
  std::vector<std::vector<Index>> groups(static_cast<std::size_t>(g));
  for (Index i = 0; i < g; ++i) {
    auto& grp = groups[static_cast<std::size_t>(i)];
    grp.assign(order.begin() + i * m, order.begin() + (i + 1) * m);
    std::sort(grp.begin(), grp.end());
  }
  return GroupedProblem(std::move(problem), std::move(groups));
}

}  // namespace pagesamp
