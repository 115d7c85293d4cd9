#pragma once

#include "pagesamp/grouped.hpp"
#include "pagesamp/objective.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace pagesamp {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Two-class sparse dataset. Features are stored 0-based (LIBSVM index k is
/// column k - 1); labels are 1 for the smaller raw label and 2 for the larger.
struct SparseDataset {
  SparseRows features;
  std::vector<int> labels;
  std::array<double, 2> raw_labels{0, 0};

  Index rows() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

SparseDataset parse_libsvm(std::istream& in);
SparseDataset load_libsvm(const std::string& path);
void write_libsvm(std::ostream& out, const SparseDataset& data);

/// Rows of `data` selected by `rows`, in that order.
SparseDataset subset(const SparseDataset& data, const std::vector<Index>& rows);

/// Two-class softmax cross-entropy with the nonconvex penalty
/// lambda sum_k x_k^2 / (1 + x_k^2) over x = [x1 ; x2] in R^{2d}.
class LogisticProblem final : public Problem {
 public:
  LogisticProblem(std::shared_ptr<const SparseDataset> data, double lambda);

  Index size() const override { return data_->rows(); }
  Index dim() const override { return 2 * data_->dim(); }
  ProblemKind kind() const override { return ProblemKind::Logistic; }

  double component_value(Index i, const Vector& x) const override;
  void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const override;
  double objective(const Vector& x) const override;
  void gradient(const Vector& x, Eigen::Ref<Vector> out) const override;

  /// L_i = |a_i|^2 / 2 + 2 lambda (upper bound); L_minus from the mean curvature bound.
  SmoothnessReport smoothness() const override;
  double weighted_lipschitz(std::span<const Index> indices, std::span<const double> weights) const override;

  double lambda() const { return lambda_; }
  const SparseDataset& data() const { return *data_; }
  double regularizer(const Vector& x) const;

 private:
  /// Margin u = a^T (x_other - x_label) of sample i.
  double margin(Index i, const Vector& x) const;
  void add_regularizer_gradient(const Vector& x, Eigen::Ref<Vector> out) const;

  std::shared_ptr<const SparseDataset> data_;
  double lambda_;
  Vector row_norm_sq_;
};

std::shared_ptr<const LogisticProblem> logistic_problem(const SparseDataset& data, double lambda = 0.001);

/// Uniformly permutes the rows with `seed` and splits them into `clients`
/// contiguous shards of near-equal size.
GroupedProblem shard(const SparseDataset& data, Index clients, std::uint64_t seed, double lambda = 0.001);

}  // namespace pagesamp
