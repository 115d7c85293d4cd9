#pragma once

#include "pagesamp/objective.hpp"

#include <optional>
#include <vector>

namespace pagesamp {

/// f_i(x) = 1/2 x^T A_i x + b_i^T x with symmetric A_i.
///
/// A_i is either tridiagonal plus a scalar shift (diag, off, shift) or dense.
/// When `stencil_scale` is set, A_i = c * tridiag(-1, 2, -1) + shift * I and
/// spectra are available in closed form.
struct QuadraticComponent {
  Vector diag;
  Vector off;
  double shift = 0;
  std::optional<double> stencil_scale;
  Matrix dense;  // used instead of the tridiagonal form when nonempty
  Vector b;

  static QuadraticComponent stencil(double c, double shift, Vector b);
  static QuadraticComponent from_dense(Matrix a, Vector b);

  Index dim() const { return b.size(); }
  bool is_dense() const { return dense.size() > 0; }
  void apply(const Vector& x, Eigen::Ref<Vector> out) const;  // out = A x
  Matrix to_dense() const;
};

class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(std::vector<QuadraticComponent> components, Vector x0,
                   ProblemKind kind = ProblemKind::Quadratic);

  Index size() const override { return static_cast<Index>(components_.size()); }
  Index dim() const override { return dim_; }
  ProblemKind kind() const override { return kind_; }

  double component_value(Index i, const Vector& x) const override;
  void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const override;
  void component_gradient_diff(Index i, const Vector& x_new, const Vector& x_old,
                               Eigen::Ref<Vector> out) const override;
  double objective(const Vector& x) const override;
  void gradient(const Vector& x, Eigen::Ref<Vector> out) const override;

  SmoothnessReport smoothness() const override;
  double weighted_lipschitz(std::span<const Index> indices, std::span<const double> weights) const override;
  std::optional<WeightedConstants> exact_weighted_constants(std::span<const Index> indices,
                                                            const Vector& w) const override;
  std::optional<double> optimal_value() const override { return optimal_value_; }
  Vector initial_point() const override { return x0_; }

  const QuadraticComponent& component(Index i) const { return components_[static_cast<std::size_t>(i)]; }
  const std::vector<QuadraticComponent>& components() const { return components_; }
  const QuadraticComponent& mean_component() const { return mean_; }
  std::optional<Vector> minimizer() const { return minimizer_; }
  /// Smallest eigenvalue of the mean Hessian.
  double strong_convexity() const { return mean_min_eigenvalue_; }
  bool all_stencil() const { return all_stencil_; }

 private:
  double component_norm(const QuadraticComponent& c) const;

  std::vector<QuadraticComponent> components_;
  QuadraticComponent mean_;
  Vector x0_;
  Index dim_ = 0;
  ProblemKind kind_;
  bool all_stencil_ = false;
  double mean_min_eigenvalue_ = 0;
  std::optional<Vector> minimizer_;
  std::optional<double> optimal_value_;
};

}  // namespace pagesamp
