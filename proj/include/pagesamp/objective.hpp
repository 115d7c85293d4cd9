#pragma once

#include "pagesamp/linalg.hpp"
#include "pagesamp/random.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pagesamp {

enum class ProblemKind { Quadratic, Logistic, AnalyticExample, Grouped };

std::string to_string(ProblemKind kind);

enum class ConstantsMethod { ExactEigenvalue, ClosedForm, UpperBound };

std::string to_string(ConstantsMethod method);

struct SmoothnessReport {
  double L_minus = 0;
  Vector L;                        // per component
  std::vector<Vector> L_client;    // per-client L_ij, grouped problems only
  ConstantsMethod method = ConstantsMethod::UpperBound;
};

/// Finite sum f(x) = (1/n) sum_i f_i(x). Implementations are immutable and
/// safe for concurrent reads.
struct WeightedConstants {
  double L_plus_w_sq = 0;
  double L_pm_w_sq = 0;
};

class Problem {
 public:
  virtual ~Problem() = default;

  virtual Index size() const = 0;
  virtual Index dim() const = 0;
  virtual ProblemKind kind() const = 0;

  virtual double component_value(Index i, const Vector& x) const = 0;
  virtual void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const = 0;

  /// out = grad f_i(x_new) - grad f_i(x_old).
  virtual void component_gradient_diff(Index i, const Vector& x_new, const Vector& x_old,
                                       Eigen::Ref<Vector> out) const;

  virtual double objective(const Vector& x) const;
  virtual void gradient(const Vector& x, Eigen::Ref<Vector> out) const;

  virtual SmoothnessReport smoothness() const;

  /// Lipschitz constant (or certified bound) of grad of sum_k weights[k] f_{indices[k]}.
  /// Default: sum_k |weights[k]| L_{indices[k]}.
  virtual double weighted_lipschitz(std::span<const Index> indices, std::span<const double> weights) const;

  /// Exact L_{+,w}^2 and L_{+-,w}^2 of the sub-sum over `indices` with weights w
  /// (aligned with indices), when the Hessians are available.
  virtual std::optional<WeightedConstants> exact_weighted_constants(std::span<const Index> indices,
                                                            const Vector& w) const;

  virtual std::optional<double> optimal_value() const { return std::nullopt; }
  virtual Vector initial_point() const { return Vector::Zero(dim()); }
};

// Checked entry points. Indices are 0-based.
Vector component_grad(const Problem& problem, Index i, const Vector& x);
Vector full_grad(const Problem& problem, const Vector& x);
double value(const Problem& problem, const Vector& x);
SmoothnessReport lipschitz_constants(const Problem& problem);

void check_point(const Problem& problem, const Vector& x);

/// Both constants from per-component Lipschitz constants: (1/n) sum L_i^2 / (n w_i).
WeightedConstants weighted_constants(const Vector& L, const Vector& w);

/// Checks w is in the simplex (sum within 1e-12); throws InvalidArgument.
void check_simplex(const Vector& w, const char* what = "weights");

/// Largest observed ratio (1/n) sum (1/(n w_i)) |D_i|^2 - |mean D|^2 over |x - y|^2,
/// where D_i = grad f_i(x) - grad f_i(y), maximized over random pairs.
double empirical_hessian_variance(const Problem& problem, const Vector& w, std::int64_t pairs, Rng& rng,
                                  double scale = 1.0);

/// Largest relative error |analytic - central difference| / max(1, |analytic|)
/// over all components and coordinates.
double grad_check(const Problem& problem, const Vector& x, double h);

enum class ConstantsMode { Auto, Exact, ComponentBound };

ConstantsMode parse_constants_mode(const std::string& text);

/// L_{+,w}^2 and L_{+-,w}^2 for sampling weights w. Exact uses the Hessian
/// matrices when the problem is quadratic; ComponentBound uses per-component L_i.
WeightedConstants sampling_constants(const Problem& problem, const Vector& w, ConstantsMode mode);

}  // namespace pagesamp
