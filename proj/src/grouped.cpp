#include "pagesamp/grouped.hpp"

#include "pagesamp/errors.hpp"
#include "pagesamp/quadratic.hpp"

#include <mutex>

namespace pagesamp {

namespace {

/// Client objectives f_i = (1/m_i) sum_j f_ij. Gradients accumulate through the
/// same `apply` as a full-batch inner draw, so composed runs with full-batch
/// inner samplings match runs on this problem bit for bit.
class ClientLevelProblem final : public Problem {
 public:
  explicit ClientLevelProblem(GroupedProblem grouped) : grouped_(std::move(grouped)) {
    const Index n = grouped_.clients();
    batches_.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const double c = 1.0 / double(grouped_.client_size(i));
      auto& d = batches_[static_cast<std::size_t>(i)];
      for (Index j = 0; j < grouped_.client_size(i); ++j) d.terms.push_back({j, c});
      d.raw_size = grouped_.client_size(i);
    }
    if (auto* q = dynamic_cast<const QuadraticProblem*>(&grouped_.base())) {
      std::vector<QuadraticComponent> means;
      for (Index i = 0; i < n; ++i) {
        std::vector<QuadraticComponent> members;
        for (Index k : grouped_.group(i)) members.push_back(q->component(k));
        means.push_back(QuadraticProblem(std::move(members), q->initial_point()).mean_component());
      }
      quadratic_ = std::make_shared<QuadraticProblem>(std::move(means), q->initial_point());
    }
  }

  Index size() const override { return grouped_.clients(); }
  Index dim() const override { return grouped_.dim(); }
  ProblemKind kind() const override { return ProblemKind::Grouped; }

  double component_value(Index i, const Vector& x) const override {
    double sum = 0;
    for (Index k : grouped_.group(i)) sum += grouped_.base().component_value(k, x);
    return sum / double(grouped_.client_size(i));
  }

  void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const override {
    Vector scratch(dim());
    const auto& members = grouped_.group(i);
    apply(
        batches_[static_cast<std::size_t>(i)],
        [&](Index j, Eigen::Ref<Vector> buf) { grouped_.base().component_gradient(members[static_cast<std::size_t>(j)], x, buf); },
        out, scratch);
  }

  void component_gradient_diff(Index i, const Vector& x_new, const Vector& x_old,
                               Eigen::Ref<Vector> out) const override {
    Vector scratch(dim());
    apply(
        batches_[static_cast<std::size_t>(i)],
        [&](Index j, Eigen::Ref<Vector> buf) { grouped_.point_gradient_diff(i, j, x_new, x_old, buf); }, out,
        scratch);
  }

  SmoothnessReport smoothness() const override { return grouped_.smoothness(); }

  double weighted_lipschitz(std::span<const Index> indices, std::span<const double> weights) const override {
    std::vector<Index> points;
    std::vector<double> pw;
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto& members = grouped_.group(indices[k]);
      for (Index p : members) {
        points.push_back(p);
        pw.push_back(weights[k] / double(members.size()));
      }
    }
    return grouped_.base().weighted_lipschitz(points, pw);
  }

  std::optional<WeightedConstants> exact_weighted_constants(std::span<const Index> indices,
                                                            const Vector& w) const override {
    if (!quadratic_) return std::nullopt;
    return quadratic_->exact_weighted_constants(indices, w);
  }

  std::optional<double> optimal_value() const override {
    return quadratic_ ? quadratic_->optimal_value() : std::nullopt;
  }
  Vector initial_point() const override { return grouped_.base().initial_point(); }

 private:
  GroupedProblem grouped_;
  std::vector<Draw> batches_;
  std::shared_ptr<QuadraticProblem> quadratic_;
};

}  // namespace

GroupedProblem::GroupedProblem(std::shared_ptr<const Problem> base, std::vector<std::vector<Index>> groups)
    : base_(std::move(base)) {
  if (!base_) throw InvalidArgument("grouped problem needs a base problem");
  if (groups.empty()) throw InvalidArgument("grouped problem needs at least one client");
  for (const auto& g : groups) {
    if (g.empty()) throw InvalidArgument("every client needs at least one point");
    for (Index k : g)
      if (k < 0 || k >= base_->size()) throw IndexOutOfRange("group references a missing component");
  }
  groups_ = std::make_shared<const std::vector<std::vector<Index>>>(std::move(groups));
}

Index GroupedProblem::total_points() const {
  Index total = 0;
  for (const auto& g : *groups_) total += static_cast<Index>(g.size());
  return total;
}

std::shared_ptr<const Problem> GroupedProblem::client_level() const {
  static std::mutex lock;
  std::lock_guard guard(lock);
  if (!client_level_) {
    GroupedProblem copy(*this);
    copy.client_level_.reset();
    client_level_ = std::make_shared<ClientLevelProblem>(std::move(copy));
  }
  return client_level_;
}

std::shared_ptr<const Problem> GroupedProblem::flattened() const {
  const double n = double(clients());
  const double N = double(total_points());
  std::vector<Index> indices;
  std::vector<double> scales;
  for (const auto& g : *groups_)
    for (Index k : g) {
      indices.push_back(k);
      scales.push_back(N / (n * double(g.size())));
    }
  return std::make_shared<ScaledSubsetProblem>(base_, std::move(indices), std::move(scales));
}

double GroupedProblem::value(const Vector& x) const { return pagesamp::value(*client_level(), x); }

Vector GroupedProblem::gradient(const Vector& x) const { return full_grad(*client_level(), x); }

SmoothnessReport GroupedProblem::smoothness() const {
  const SmoothnessReport point = base_->smoothness();
  SmoothnessReport report;
  report.method = point.method;
  const Index n = clients();
  report.L.resize(n);
  std::vector<Index> all;
  std::vector<double> all_w;
  for (Index i = 0; i < n; ++i) {
    const auto& g = group(i);
    const std::vector<double> w(g.size(), 1.0 / double(g.size()));
    report.L(i) = base_->weighted_lipschitz(g, w);
    Vector Lij(static_cast<Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j) {
      Lij(static_cast<Index>(j)) = point.L(g[j]);
      all.push_back(g[j]);
      all_w.push_back(1.0 / (double(n) * double(g.size())));
    }
    report.L_client.push_back(std::move(Lij));
  }
  report.L_minus = base_->weighted_lipschitz(all, all_w);
  return report;
}

std::vector<ClientConstants> GroupedProblem::client_constants(const std::vector<Vector>& inner_weights,
                                                              ConstantsMode mode) const {
  if (static_cast<Index>(inner_weights.size()) != clients())
    throw DimensionMismatch("need inner weights for every client");
  std::optional<SmoothnessReport> point;
  std::vector<ClientConstants> out;
  for (Index i = 0; i < clients(); ++i) {
    const auto& g = group(i);
    const Vector& w = inner_weights[static_cast<std::size_t>(i)];
    if (w.size() != static_cast<Index>(g.size())) throw DimensionMismatch("inner weights must match client size");
    if (mode != ConstantsMode::ComponentBound) {
      if (auto exact = base_->exact_weighted_constants(g, w)) {
        out.push_back({exact->L_plus_w_sq, exact->L_pm_w_sq});
        continue;
      }
      if (mode == ConstantsMode::Exact) throw Unsupported("exact per-client constants need Hessians");
    }
    if (!point) point = base_->smoothness();
    Vector L(static_cast<Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j) L(static_cast<Index>(j)) = point->L(g[j]);
    const WeightedConstants c = weighted_constants(L, w);
    out.push_back({c.L_plus_w_sq, c.L_pm_w_sq});
  }
  return out;
}

// ---------------------------------------------------------------------------

ScaledSubsetProblem::ScaledSubsetProblem(std::shared_ptr<const Problem> base, std::vector<Index> indices,
                                         std::vector<double> scales)
    : base_(std::move(base)), indices_(std::move(indices)), scales_(std::move(scales)) {
  if (indices_.size() != scales_.size()) throw DimensionMismatch("indices and scales differ in length");
  if (indices_.empty()) throw InvalidArgument("subset problem needs at least one component");
  for (Index k : indices_)
    if (k < 0 || k >= base_->size()) throw IndexOutOfRange("subset references a missing component");
}

double ScaledSubsetProblem::component_value(Index i, const Vector& x) const {
  const auto k = static_cast<std::size_t>(i);
  return scales_[k] * base_->component_value(indices_[k], x);
}

void ScaledSubsetProblem::component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const {
  const auto k = static_cast<std::size_t>(i);
  base_->component_gradient(indices_[k], x, out);
  out *= scales_[k];
}

void ScaledSubsetProblem::component_gradient_diff(Index i, const Vector& x_new, const Vector& x_old,
                                                  Eigen::Ref<Vector> out) const {
  const auto k = static_cast<std::size_t>(i);
  base_->component_gradient_diff(indices_[k], x_new, x_old, out);
  out *= scales_[k];
}

SmoothnessReport ScaledSubsetProblem::smoothness() const {
  const SmoothnessReport b = base_->smoothness();
  SmoothnessReport r;
  r.method = b.method;
  r.L.resize(size());
  std::vector<double> w(indices_.size());
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    r.L(static_cast<Index>(k)) = std::abs(scales_[k]) * b.L(indices_[k]);
    w[k] = scales_[k] / double(indices_.size());
  }
  r.L_minus = base_->weighted_lipschitz(indices_, w);
  return r;
}

double ScaledSubsetProblem::weighted_lipschitz(std::span<const Index> indices, std::span<const double> weights) const {
  std::vector<Index> idx(indices.size());
  std::vector<double> w(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto j = static_cast<std::size_t>(indices[k]);
    idx[k] = indices_[j];
    w[k] = weights[k] * scales_[j];
  }
  return base_->weighted_lipschitz(idx, w);
}

}  // namespace pagesamp
