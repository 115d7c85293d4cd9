#pragma once

#include "pagesamp/objective.hpp"
#include "pagesamp/sampling.hpp"

#include <memory>
#include <vector>

namespace pagesamp {

/// Two-level finite sum f(x) = (1/n) sum_i (1/m_i) sum_j f_ij(x), where f_ij
/// are components of a shared base problem selected by index groups.
class GroupedProblem {
 public:
  GroupedProblem(std::shared_ptr<const Problem> base, std::vector<std::vector<Index>> groups);

  Index clients() const { return static_cast<Index>(groups_->size()); }
  Index client_size(Index i) const { return static_cast<Index>(group(i).size()); }
  Index dim() const { return base_->dim(); }
  Index total_points() const;
  const Problem& base() const { return *base_; }
  const std::shared_ptr<const Problem>& base_ptr() const { return base_; }
  const std::vector<Index>& group(Index i) const { return (*groups_)[static_cast<std::size_t>(i)]; }
  const std::vector<std::vector<Index>>& groups() const { return *groups_; }

  /// grad f_ij(x_new) - grad f_ij(x_old) for point j of client i.
  void point_gradient_diff(Index i, Index j, const Vector& x_new, const Vector& x_old, Eigen::Ref<Vector> out) const {
    base_->component_gradient_diff(group(i)[static_cast<std::size_t>(j)], x_new, x_old, out);
  }

  /// Single-level problem whose components are the client objectives f_i.
  std::shared_ptr<const Problem> client_level() const;

  /// Single-level problem over all points with components (N / (n m_i)) f_ij,
  /// N the total point count; its mean equals f.
  std::shared_ptr<const Problem> flattened() const;

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;

  /// Client-level L_i and L_minus plus per-client point constants L_ij.
  SmoothnessReport smoothness() const;

  /// (L_{i,+,w_i}^2, L_{i,+-,w_i}^2) for every client, for inner weights w_i.
  std::vector<ClientConstants> client_constants(const std::vector<Vector>& inner_weights, ConstantsMode mode) const;

 private:
  std::shared_ptr<const Problem> base_;
  std::shared_ptr<const std::vector<std::vector<Index>>> groups_;
  mutable std::shared_ptr<const Problem> client_level_;
};

/// Components scale_k * f_{indices[k]} of a base problem.
class ScaledSubsetProblem final : public Problem {
 public:
  ScaledSubsetProblem(std::shared_ptr<const Problem> base, std::vector<Index> indices, std::vector<double> scales);

  Index size() const override { return static_cast<Index>(indices_.size()); }
  Index dim() const override { return base_->dim(); }
  ProblemKind kind() const override { return base_->kind(); }
  double component_value(Index i, const Vector& x) const override;
  void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const override;
  void component_gradient_diff(Index i, const Vector& x_new, const Vector& x_old,
                               Eigen::Ref<Vector> out) const override;
  SmoothnessReport smoothness() const override;
  double weighted_lipschitz(std::span<const Index> indices, std::span<const double> weights) const override;
  Vector initial_point() const override { return base_->initial_point(); }

 private:
  std::shared_ptr<const Problem> base_;
  std::vector<Index> indices_;
  std::vector<double> scales_;
};

}  // namespace pagesamp
