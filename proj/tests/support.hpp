#pragma once

#include "pagesamp/data.hpp"
#include "pagesamp/errors.hpp"
#include "pagesamp/linalg.hpp"
#include "pagesamp/page.hpp"
#include "pagesamp/taskgen.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace testing {

using namespace pagesamp;

inline Vector random_vector(Rng& rng, Index d, double scale = 1.0) {
  Vector v(d);
  for (Index k = 0; k < d; ++k) v(k) = scale * standard_normal(rng);
  return v;
}

inline Matrix random_matrix(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = standard_normal(rng);
  return m;
}

inline Index random_between(Rng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(uniform_index(rng, std::uint64_t(hi - lo + 1)));
}

/// Random quadratic with dense symmetric (possibly indefinite) components.
inline std::shared_ptr<const QuadraticProblem> random_quadratic(Rng& rng, Index n, Index d, bool psd = true) {
  std::vector<QuadraticComponent> comps;
  for (Index i = 0; i < n; ++i) {
    const Matrix g = random_matrix(rng, d, d);
    Matrix a = psd ? Matrix(g * g.transpose() / double(d)) : Matrix((g + g.transpose()) / 2.0);
    comps.push_back(QuadraticComponent::from_dense(std::move(a), random_vector(rng, d)));
  }
  return std::make_shared<QuadraticProblem>(std::move(comps), random_vector(rng, d));
}

inline double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace testing
