#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>

namespace pagesamp {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// k-th eigenvalue (k = 1..d) of the d x d tridiagonal stencil (-1, 2, -1).
template <typename Scalar = double>
Scalar stencil_eigenvalue(Index k, Index d) {
  using std::cos;
  return Scalar(2) - Scalar(2) * cos(Scalar(k) * std::numbers::pi_v<Scalar> / Scalar(d + 1));
}

template <typename Scalar = double>
Scalar stencil_min_eigenvalue(Index d) {
  return stencil_eigenvalue<Scalar>(1, d);
}

template <typename Scalar = double>
Scalar stencil_max_eigenvalue(Index d) {
  return stencil_eigenvalue<Scalar>(d, d);
}

/// Extreme eigenvalues of c * stencil + shift * I.
template <typename Scalar = double>
Scalar scaled_stencil_min(Scalar c, Scalar shift, Index d) {
  return (c >= 0 ? c * stencil_min_eigenvalue<Scalar>(d) : c * stencil_max_eigenvalue<Scalar>(d)) + shift;
}

template <typename Scalar = double>
Scalar scaled_stencil_max(Scalar c, Scalar shift, Index d) {
  return (c >= 0 ? c * stencil_max_eigenvalue<Scalar>(d) : c * stencil_min_eigenvalue<Scalar>(d)) + shift;
}

template <typename Scalar = double>
Scalar scaled_stencil_norm(Scalar c, Scalar shift, Index d) {
  using std::abs;
  using std::max;
  return max(abs(scaled_stencil_min(c, shift, d)), abs(scaled_stencil_max(c, shift, d)));
}

/// y = T x for the symmetric tridiagonal T with the given diagonal and off-diagonal.
template <typename DiagDerived, typename OffDerived, typename InDerived, typename OutDerived>
void tridiagonal_apply(const Eigen::MatrixBase<DiagDerived>& diag, const Eigen::MatrixBase<OffDerived>& off,
                       const Eigen::MatrixBase<InDerived>& x, Eigen::MatrixBase<OutDerived>& y) {
  const Index d = diag.size();
  for (Index k = 0; k < d; ++k) {
    auto v = diag(k) * x(k);
    if (k > 0) v += off(k - 1) * x(k - 1);
    if (k + 1 < d) v += off(k) * x(k + 1);
    y(k) = v;
  }
}

struct PowerMethodResult {
  double norm = 0;
  std::int64_t iterations = 0;
  bool converged = false;
};

/// Spectral norm of a symmetric operator by power iteration on its square.
/// `apply(in, out)` must write op * in into out. Stops when the Rayleigh quotient
/// changes by less than `tol` (relative) between iterations.
template <typename Op>
PowerMethodResult power_method_norm(Op&& apply, Index dim, double tol = 1e-10, std::int64_t max_iter = 200000) {
  PowerMethodResult result;
  if (dim == 0) {
    result.converged = true;
    return result;
  }
  Vector v(dim), w(dim);
  // Deterministic start with components along every eigenvector in practice.
  for (Index k = 0; k < dim; ++k) v(k) = 1.0 + 0.37 * std::sin(1.0 + 2.3 * double(k));
  v.normalize();
  double previous = -1;
  for (std::int64_t it = 1; it <= max_iter; ++it) {
    apply(v, w);
    const double rq = w.squaredNorm();
    result.iterations = it;
    if (rq == 0) {
      result.norm = 0;
      result.converged = true;
      return result;
    }
    apply(w, v);
    const double vn = v.norm();
    if (vn == 0) {
      result.norm = std::sqrt(rq);
      result.converged = true;
      return result;
    }
    v /= vn;
    // Extra factor 1e-2: successive-change tests underestimate the remaining error.
    if (previous > 0 && std::abs(rq - previous) <= 1e-2 * tol * rq) {
      result.norm = std::sqrt(rq);
      result.converged = true;
      return result;
    }
    previous = rq;
  }
  result.norm = std::sqrt(previous);
  return result;
}

/// Largest eigenvalue of a dense symmetric matrix.
inline double symmetric_max_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(m.rows() - 1);
}

inline double symmetric_min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

inline double symmetric_spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return std::max(std::abs(solver.eigenvalues()(0)), std::abs(solver.eigenvalues()(m.rows() - 1)));
}

}  // namespace pagesamp
