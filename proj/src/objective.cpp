#include "pagesamp/objective.hpp"

#include "pagesamp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pagesamp {

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Quadratic: return "quadratic";
    case ProblemKind::Logistic: return "logistic";
    case ProblemKind::AnalyticExample: return "analytic-example";
    case ProblemKind::Grouped: return "grouped";
  }
  return "unknown";
}

std::string to_string(ConstantsMethod method) {
  switch (method) {
    case ConstantsMethod::ExactEigenvalue: return "exact-eigenvalue";
    case ConstantsMethod::ClosedForm: return "closed-form";
    case ConstantsMethod::UpperBound: return "upper-bound";
  }
  return "unknown";
}

void Problem::component_gradient_diff(Index i, const Vector& x_new, const Vector& x_old,
                                      Eigen::Ref<Vector> out) const {
  Vector old(dim());
  component_gradient(i, x_new, out);
  component_gradient(i, x_old, old);
  out -= old;
}

double Problem::objective(const Vector& x) const {
  double sum = 0;
  for (Index i = 0; i < size(); ++i) sum += component_value(i, x);
  return sum / double(size());
}

void Problem::gradient(const Vector& x, Eigen::Ref<Vector> out) const {
  Vector tmp(dim());
  out.setZero();
  for (Index i = 0; i < size(); ++i) {
    component_gradient(i, x, tmp);
    out += tmp;
  }
  out /= double(size());
}

SmoothnessReport Problem::smoothness() const {
  throw Unsupported("smoothness constants are not available for " + to_string(kind()) + " problems");
}

double Problem::weighted_lipschitz(std::span<const Index> indices, std::span<const double> weights) const {
  const SmoothnessReport report = smoothness();
  double total = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) total += std::abs(weights[k]) * report.L(indices[k]);
  return total;
}

std::optional<WeightedConstants> Problem::exact_weighted_constants(std::span<const Index>, const Vector&) const {
  return std::nullopt;
}

void check_point(const Problem& problem, const Vector& x) {
  if (x.size() != problem.dim())
    throw DimensionMismatch("point has dimension " + std::to_string(x.size()) + ", problem has " +
                            std::to_string(problem.dim()));
  if (!x.allFinite()) throw InvalidArgument("point has non-finite entries");
}

static void check_index(const Problem& problem, Index i) {
  if (i < 0 || i >= problem.size())
    throw IndexOutOfRange("component index " + std::to_string(i) + " outside [0, " + std::to_string(problem.size()) +
                          ")");
}

Vector component_grad(const Problem& problem, Index i, const Vector& x) {
  check_index(problem, i);
  check_point(problem, x);
  Vector out(problem.dim());
  problem.component_gradient(i, x, out);
  return out;
}

Vector full_grad(const Problem& problem, const Vector& x) {
  check_point(problem, x);
  Vector out(problem.dim());
  problem.gradient(x, out);
  return out;
}

double value(const Problem& problem, const Vector& x) {
  check_point(problem, x);
  return problem.objective(x);
}

SmoothnessReport lipschitz_constants(const Problem& problem) { return problem.smoothness(); }

void check_simplex(const Vector& w, const char* what) {
  if (w.size() == 0) throw InvalidArgument(std::string(what) + " are empty");
  for (Index i = 0; i < w.size(); ++i)
    if (!(w(i) >= 0) || !std::isfinite(w(i))) throw InvalidArgument(std::string(what) + " must be nonnegative");
  if (std::abs(w.sum() - 1.0) > 1e-12) throw InvalidArgument(std::string(what) + " must sum to 1");
}

WeightedConstants weighted_constants(const Vector& L, const Vector& w) {
  if (L.size() != w.size()) throw DimensionMismatch("constants and weights differ in length");
  check_simplex(w);
  const double n = double(L.size());
  double total = 0;
  for (Index i = 0; i < L.size(); ++i) {
    if (L(i) < 0) throw InvalidArgument("Lipschitz constants must be nonnegative");
    if (L(i) == 0) continue;
    if (w(i) == 0) throw InvalidArgument("zero weight paired with a nonzero Lipschitz constant");
    total += L(i) * L(i) / (n * w(i));
  }
  total /= n;
  return {total, total};
}

double empirical_hessian_variance(const Problem& problem, const Vector& w, std::int64_t pairs, Rng& rng,
                                  double scale) {
  if (pairs < 1) throw InvalidArgument("pairs must be at least 1");
  if (w.size() != problem.size()) throw DimensionMismatch("weights must have one entry per component");
  check_simplex(w);
  const Index n = problem.size();
  const Index d = problem.dim();
  Vector x(d), y(d), diff(d), mean(d);
  double best = 0;
  for (std::int64_t t = 0; t < pairs; ++t) {
    for (Index k = 0; k < d; ++k) x(k) = scale * standard_normal(rng);
    for (Index k = 0; k < d; ++k) y(k) = x(k) + scale * standard_normal(rng);
    const double dist_sq = (x - y).squaredNorm();
    if (dist_sq == 0) continue;
    double weighted = 0;
    mean.setZero();
    for (Index i = 0; i < n; ++i) {
      problem.component_gradient_diff(i, x, y, diff);
      mean += diff;
      const double sq = diff.squaredNorm();
      if (w(i) == 0) {
        if (sq > 0) return std::numeric_limits<double>::infinity();
        continue;
      }
      weighted += sq / (double(n) * w(i));
    }
    mean /= double(n);
    const double ratio = (weighted / double(n) - mean.squaredNorm()) / dist_sq;
    best = std::max(best, ratio);
  }
  return best;
}

double grad_check(const Problem& problem, const Vector& x, double h) {
  if (!(h > 0)) throw InvalidArgument("finite-difference step must be positive");
  check_point(problem, x);
  const Index d = problem.dim();
  Vector g(d), xp = x, xm = x;
  double worst = 0;
  for (Index i = 0; i < problem.size(); ++i) {
    problem.component_gradient(i, x, g);
    for (Index k = 0; k < d; ++k) {
      xp(k) = x(k) + h;
      xm(k) = x(k) - h;
      const double fd = (problem.component_value(i, xp) - problem.component_value(i, xm)) / (2 * h);
      xp(k) = x(k);
      xm(k) = x(k);
      worst = std::max(worst, std::abs(g(k) - fd) / std::max(1.0, std::abs(g(k))));
    }
  }
  return worst;
}

ConstantsMode parse_constants_mode(const std::string& text) {
  if (text == "auto") return ConstantsMode::Auto;
  if (text == "exact") return ConstantsMode::Exact;
  if (text == "bound") return ConstantsMode::ComponentBound;
  throw InvalidArgument("unknown constants mode '" + text + "' (expected auto, exact or bound)");
}

WeightedConstants sampling_constants(const Problem& problem, const Vector& w, ConstantsMode mode) {
  if (w.size() != problem.size()) throw DimensionMismatch("weights must have one entry per component");
  if (mode != ConstantsMode::ComponentBound) {
    std::vector<Index> all(static_cast<std::size_t>(problem.size()));
    std::iota(all.begin(), all.end(), Index(0));
    if (auto exact = problem.exact_weighted_constants(all, w)) return *exact;
    if (mode == ConstantsMode::Exact)
      throw Unsupported("exact weighted constants need Hessians; " + to_string(problem.kind()) +
                        " problems only provide per-component bounds");
  }
  return weighted_constants(problem.smoothness().L, w);
}

}  // namespace pagesamp
