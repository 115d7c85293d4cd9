#include "pagesamp/quadratic.hpp"

#include "pagesamp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pagesamp {

QuadraticComponent QuadraticComponent::stencil(double c, double shift, Vector b) {
  QuadraticComponent q;
  const Index d = b.size();
  q.diag = Vector::Constant(d, 2 * c);
  q.off = Vector::Constant(std::max<Index>(d - 1, 0), -c);
  q.shift = shift;
  q.stencil_scale = c;
  q.b = std::move(b);
  return q;
}

QuadraticComponent QuadraticComponent::from_dense(Matrix a, Vector b) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw DimensionMismatch("dense Hessian must be d x d");
  if ((a - a.transpose()).norm() > 1e-12 * (1 + a.norm()))
    throw InvalidArgument("dense Hessian must be symmetric");
  QuadraticComponent q;
  q.dense = std::move(a);
  q.b = std::move(b);
  return q;
}

void QuadraticComponent::apply(const Vector& x, Eigen::Ref<Vector> out) const {
  if (is_dense()) {
    out.noalias() = dense * x;
    return;
  }
  tridiagonal_apply(diag, off, x, out);
  if (shift != 0) out += shift * x;
}

Matrix QuadraticComponent::to_dense() const {
  if (is_dense()) return dense;
  const Index d = dim();
  Matrix m = Matrix::Zero(d, d);
  for (Index k = 0; k < d; ++k) m(k, k) = diag(k) + shift;
  for (Index k = 0; k + 1 < d; ++k) m(k, k + 1) = m(k + 1, k) = off(k);
  return m;
}

QuadraticProblem::QuadraticProblem(std::vector<QuadraticComponent> components, Vector x0, ProblemKind kind)
    : components_(std::move(components)), x0_(std::move(x0)), kind_(kind) {
  if (components_.empty()) throw InvalidArgument("quadratic problem needs at least one component");
  dim_ = components_.front().dim();
  if (dim_ < 1) throw InvalidArgument("dimension must be positive");
  if (x0_.size() != dim_) throw DimensionMismatch("starting point dimension differs from components");
  bool any_dense = false;
  all_stencil_ = true;
  for (const auto& c : components_) {
    if (c.dim() != dim_) throw DimensionMismatch("components differ in dimension");
    if (c.is_dense()) {
      any_dense = true;
    } else if (c.diag.size() != dim_ || c.off.size() != std::max<Index>(dim_ - 1, 0)) {
      throw DimensionMismatch("tridiagonal component has wrong diagonal lengths");
    }
    if (!c.stencil_scale) all_stencil_ = false;
  }
  const double n = double(components_.size());
  mean_.b = Vector::Zero(dim_);
  for (const auto& c : components_) mean_.b += c.b;
  mean_.b /= n;
  if (any_dense) {
    all_stencil_ = false;
    mean_.dense = Matrix::Zero(dim_, dim_);
    for (const auto& c : components_) mean_.dense += c.to_dense();
    mean_.dense /= n;
  } else {
    mean_.diag = Vector::Zero(dim_);
    mean_.off = Vector::Zero(std::max<Index>(dim_ - 1, 0));
    double scale = 0;
    for (const auto& c : components_) {
      mean_.diag += c.diag;
      mean_.off += c.off;
      mean_.shift += c.shift;
      if (all_stencil_) scale += *c.stencil_scale;
    }
    mean_.diag /= n;
    mean_.off /= n;
    mean_.shift /= n;
    if (all_stencil_) mean_.stencil_scale = scale / n;
  }

  const Matrix mean_dense = mean_.to_dense();
  if (all_stencil_)
    mean_min_eigenvalue_ = scaled_stencil_min(*mean_.stencil_scale, mean_.shift, dim_);
  else
    mean_min_eigenvalue_ = symmetric_min_eigenvalue(mean_dense);
  if (mean_min_eigenvalue_ > 0) {
    Eigen::LDLT<Matrix> ldlt(mean_dense);
    Vector xs = ldlt.solve(-mean_.b);
    optimal_value_ = 0.5 * mean_.b.dot(xs);
    minimizer_ = std::move(xs);
  }
}

double QuadraticProblem::component_value(Index i, const Vector& x) const {
  const auto& c = component(i);
  Vector ax(dim_);
  c.apply(x, ax);
  return 0.5 * x.dot(ax) + c.b.dot(x);
}

void QuadraticProblem::component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const {
  const auto& c = component(i);
  c.apply(x, out);
  out += c.b;
}

void QuadraticProblem::component_gradient_diff(Index i, const Vector& x_new, const Vector& x_old,
                                               Eigen::Ref<Vector> out) const {
  const Vector delta = x_new - x_old;
  component(i).apply(delta, out);
}

double QuadraticProblem::objective(const Vector& x) const {
  Vector ax(dim_);
  mean_.apply(x, ax);
  return 0.5 * x.dot(ax) + mean_.b.dot(x);
}

void QuadraticProblem::gradient(const Vector& x, Eigen::Ref<Vector> out) const {
  mean_.apply(x, out);
  out += mean_.b;
}

double QuadraticProblem::component_norm(const QuadraticComponent& c) const {
  if (c.stencil_scale) return scaled_stencil_norm(*c.stencil_scale, c.shift, dim_);
  if (c.is_dense()) return symmetric_spectral_norm(c.dense);
  return power_method_norm([&](const Vector& in, Vector& out) { c.apply(in, out); }, dim_).norm;
}

SmoothnessReport QuadraticProblem::smoothness() const {
  SmoothnessReport report;
  report.method = all_stencil_ ? ConstantsMethod::ClosedForm : ConstantsMethod::ExactEigenvalue;
  report.L.resize(size());
  for (Index i = 0; i < size(); ++i) report.L(i) = component_norm(component(i));
  report.L_minus = component_norm(mean_);
  return report;
}

double QuadraticProblem::weighted_lipschitz(std::span<const Index> indices, std::span<const double> weights) const {
  if (indices.size() != weights.size()) throw DimensionMismatch("indices and weights differ in length");
  bool stencil = true;
  bool dense = false;
  for (Index i : indices) {
    stencil = stencil && component(i).stencil_scale.has_value();
    dense = dense || component(i).is_dense();
  }
  if (stencil) {
    double c = 0, s = 0;
    for (std::size_t k = 0; k < indices.size(); ++k) {
      c += weights[k] * *component(indices[k]).stencil_scale;
      s += weights[k] * component(indices[k]).shift;
    }
    return scaled_stencil_norm(c, s, dim_);
  }
  Matrix sum = Matrix::Zero(dim_, dim_);
  for (std::size_t k = 0; k < indices.size(); ++k) sum += weights[k] * component(indices[k]).to_dense();
  return symmetric_spectral_norm(sum);
}

std::optional<WeightedConstants> QuadraticProblem::exact_weighted_constants(std::span<const Index> indices,
                                                                            const Vector& w) const {
  const Index m = static_cast<Index>(indices.size());
  if (w.size() != m) throw DimensionMismatch("weights must align with indices");
  check_simplex(w);
  const double md = double(m);
  bool stencil = true;
  for (Index i : indices) stencil = stencil && component(i).stencil_scale.has_value();

  auto coefficient = [&](Index k, bool nonzero) {
    if (w(k) == 0) {
      if (nonzero) throw InvalidArgument("zero weight paired with a nonzero Hessian");
      return 0.0;
    }
    return 1.0 / (md * md * w(k));
  };

  WeightedConstants out;
  if (stencil) {
    // All matrices share the stencil eigenvectors, so both constants are maxima over its spectrum.
    for (Index e = 1; e <= dim_; ++e) {
      const double ev = stencil_eigenvalue(e, dim_);
      double second = 0, mean = 0;
      for (Index k = 0; k < m; ++k) {
        const auto& c = component(indices[static_cast<std::size_t>(k)]);
        const double lam = *c.stencil_scale * ev + c.shift;
        second += coefficient(k, lam != 0) * lam * lam;
        mean += lam / md;
      }
      out.L_plus_w_sq = std::max(out.L_plus_w_sq, second);
      out.L_pm_w_sq = std::max(out.L_pm_w_sq, second - mean * mean);
    }
    return out;
  }
  Matrix second = Matrix::Zero(dim_, dim_);
  Matrix mean = Matrix::Zero(dim_, dim_);
  for (Index k = 0; k < m; ++k) {
    const Matrix a = component(indices[static_cast<std::size_t>(k)]).to_dense();
    second.noalias() += coefficient(k, !a.isZero(0)) * (a * a);
    mean += a / md;
  }
  out.L_plus_w_sq = std::max(0.0, symmetric_max_eigenvalue(second));
  const Matrix variance = second - mean * mean;
  out.L_pm_w_sq = std::max(0.0, symmetric_max_eigenvalue(0.5 * (variance + variance.transpose())));
  return out;
}

}  // namespace pagesamp
