#include "pagesamp/sampling.hpp"

#include "pagesamp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pagesamp {

std::string to_string(SamplingKind kind) {
  switch (kind) {
    case SamplingKind::UniformWithReplacement: return "uniform-with-replacement";
    case SamplingKind::Importance: return "importance";
    case SamplingKind::Nice: return "nice";
    case SamplingKind::Independent: return "independent";
    case SamplingKind::ExtendedNice: return "extended-nice";
    case SamplingKind::FullBatch: return "full-batch";
  }
  return "unknown";
}

SamplingKind parse_sampling_kind(const std::string& text) {
  if (text == "uniform-with-replacement" || text == "uniform" || text == "uwr")
    return SamplingKind::UniformWithReplacement;
  if (text == "importance") return SamplingKind::Importance;
  if (text == "nice") return SamplingKind::Nice;
  if (text == "independent") return SamplingKind::Independent;
  if (text == "extended-nice") return SamplingKind::ExtendedNice;
  if (text == "full-batch" || text == "fullbatch") return SamplingKind::FullBatch;
  throw InvalidArgument("unknown sampling kind '" + text + "'");
}

static void check_tau(Index n, Index tau) {
  if (n < 1) throw InvalidArgument("ground set must be nonempty");
  if (tau < 1 || tau > n)
    throw InvalidArgument("batch size " + std::to_string(tau) + " outside [1, " + std::to_string(n) + "]");
}

/// (N - tau) / (tau (N - 1)), zero at tau = N.
static double nice_factor(double N, double tau) {
  if (tau >= N) return 0.0;
  return (N - tau) / (tau * (N - 1));
}

SamplingSpec uniform_with_replacement(Index n, Index tau) {
  check_tau(n, tau);
  SamplingSpec s;
  s.kind = SamplingKind::UniformWithReplacement;
  s.n = n;
  s.tau = tau;
  s.probabilities = Vector::Constant(n, 1.0 / double(n));
  s.A = s.B = 1.0 / double(tau);
  s.w = Vector::Constant(n, 1.0 / double(n));
  s.expected_cardinality = double(tau);
  return s;
}

SamplingSpec importance(const Vector& q, Index tau) {
  const Index n = q.size();
  check_tau(n, tau);
  for (Index i = 0; i < n; ++i)
    if (!(q(i) > 0) || !std::isfinite(q(i))) throw InvalidArgument("importance probabilities must be positive");
  if (std::abs(q.sum() - 1.0) > 1e-12) throw InvalidArgument("importance probabilities must sum to 1");
  SamplingSpec s;
  s.kind = SamplingKind::Importance;
  s.n = n;
  s.tau = tau;
  s.probabilities = q;
  s.A = s.B = 1.0 / double(tau);
  s.w = q;
  s.expected_cardinality = double(tau);
  return s;
}

SamplingSpec nice(Index n, Index tau) {
  check_tau(n, tau);
  SamplingSpec s;
  s.kind = SamplingKind::Nice;
  s.n = n;
  s.tau = tau;
  s.A = s.B = nice_factor(double(n), double(tau));
  s.w = Vector::Constant(n, 1.0 / double(n));
  s.expected_cardinality = double(tau);
  return s;
}

SamplingSpec independent(const Vector& p) {
  const Index n = p.size();
  if (n < 1) throw InvalidArgument("ground set must be nonempty");
  Vector ratio(n);
  for (Index i = 0; i < n; ++i) {
    if (!(p(i) > 0 && p(i) < 1)) throw InvalidArgument("independent probabilities must lie strictly in (0, 1)");
    ratio(i) = p(i) / (1 - p(i));
  }
  const double total = ratio.sum();
  SamplingSpec s;
  s.kind = SamplingKind::Independent;
  s.n = n;
  s.probabilities = p;
  s.A = 1.0 / total;
  s.B = 0;
  s.w = ratio / total;
  s.expected_cardinality = p.sum();
  return s;
}

SamplingSpec extended_nice(const std::vector<Index>& l, Index tau) {
  const Index n = static_cast<Index>(l.size());
  if (n < 1) throw InvalidArgument("ground set must be nonempty");
  double N = 0;
  for (Index li : l) {
    if (li < 1) throw InvalidArgument("extended nice repeats must be positive integers");
    N += double(li);
  }
  check_tau(static_cast<Index>(N), tau);
  SamplingSpec s;
  s.kind = SamplingKind::ExtendedNice;
  s.n = n;
  s.tau = tau;
  s.repeats = l;
  s.A = s.B = nice_factor(N, double(tau));
  s.w.resize(n);
  for (Index i = 0; i < n; ++i) s.w(i) = double(l[static_cast<std::size_t>(i)]) / N;
  s.expected_cardinality = double(tau);
  return s;
}

SamplingSpec full_batch(Index n) {
  if (n < 1) throw InvalidArgument("ground set must be nonempty");
  SamplingSpec s;
  s.kind = SamplingKind::FullBatch;
  s.n = n;
  s.tau = n;
  s.A = s.B = 0;
  s.w = Vector::Constant(n, 1.0 / double(n));
  s.expected_cardinality = double(n);
  return s;
}

SamplingSpec build(SamplingKind kind, const SamplingParams& params, Index n) {
  switch (kind) {
    case SamplingKind::UniformWithReplacement: return uniform_with_replacement(n, params.tau);
    case SamplingKind::Importance:
      if (params.q.size() != n) throw DimensionMismatch("importance probabilities must have length n");
      return importance(params.q, params.tau);
    case SamplingKind::Nice: return nice(n, params.tau);
    case SamplingKind::Independent:
      if (params.p.size() != n) throw DimensionMismatch("independent probabilities must have length n");
      return independent(params.p);
    case SamplingKind::ExtendedNice:
      if (static_cast<Index>(params.l.size()) != n) throw DimensionMismatch("repeats must have length n");
      return extended_nice(params.l, params.tau);
    case SamplingKind::FullBatch: return full_batch(n);
  }
  throw InvalidArgument("unknown sampling kind");
}

Vector optimal_importance_weights(const Vector& L) {
  if (L.size() == 0) throw InvalidArgument("constants are empty");
  for (Index i = 0; i < L.size(); ++i)
    if (!(L(i) > 0) || !std::isfinite(L(i))) throw InvalidArgument("importance weights need positive constants");
  return L / L.sum();
}

// --- sampler -----------------------------------------------------------------

static void merge_draw(Draw& d) {
  std::sort(d.terms.begin(), d.terms.end(), [](const Term& a, const Term& b) { return a.index < b.index; });
  std::size_t w = 0;
  for (std::size_t r = 0; r < d.terms.size(); ++r) {
    if (w > 0 && d.terms[w - 1].index == d.terms[r].index)
      d.terms[w - 1].coefficient += d.terms[r].coefficient;
    else
      d.terms[w++] = d.terms[r];
  }
  d.terms.resize(w);
}

Sampler::Sampler(SamplingSpec spec) : spec_(std::move(spec)) {
  switch (spec_.kind) {
    case SamplingKind::UniformWithReplacement:
      break;
    case SamplingKind::Importance: {
      cumulative_.resize(static_cast<std::size_t>(spec_.n));
      double acc = 0;
      for (Index i = 0; i < spec_.n; ++i) cumulative_[static_cast<std::size_t>(i)] = acc += spec_.probabilities(i);
      break;
    }
    case SamplingKind::Nice:
      permutation_.resize(static_cast<std::size_t>(spec_.n));
      std::iota(permutation_.begin(), permutation_.end(), Index(0));
      break;
    case SamplingKind::ExtendedNice: {
      cumulative_.resize(spec_.repeats.size());
      double acc = 0;
      for (std::size_t i = 0; i < spec_.repeats.size(); ++i) cumulative_[i] = acc += double(spec_.repeats[i]);
      expanded_size_ = static_cast<std::int64_t>(acc);
      break;
    }
    case SamplingKind::Independent:
    case SamplingKind::FullBatch:
      break;
  }
}

Index Sampler::categorical(Rng& rng) const {
  const double u = uniform01(rng) * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto pos = std::min<std::ptrdiff_t>(it - cumulative_.begin(), std::ptrdiff_t(cumulative_.size()) - 1);
  return static_cast<Index>(pos);
}

void Sampler::draw(Rng& rng, Draw& out) {
  out.terms.clear();
  const Index n = spec_.n;
  const double nd = double(n);
  switch (spec_.kind) {
    case SamplingKind::UniformWithReplacement: {
      const double c = 1.0 / double(spec_.tau);
      for (Index k = 0; k < spec_.tau; ++k)
        out.terms.push_back({static_cast<Index>(uniform_index(rng, std::uint64_t(n))), c});
      out.raw_size = spec_.tau;
      merge_draw(out);
      return;
    }
    case SamplingKind::Importance: {
      const double tau = double(spec_.tau);
      for (Index k = 0; k < spec_.tau; ++k) {
        const Index i = categorical(rng);
        out.terms.push_back({i, 1.0 / (tau * nd * spec_.probabilities(i))});
      }
      out.raw_size = spec_.tau;
      merge_draw(out);
      return;
    }
    case SamplingKind::Nice: {
      const double c = 1.0 / double(spec_.tau);
      for (Index k = 0; k < spec_.tau; ++k) {
        const auto j = k + static_cast<Index>(uniform_index(rng, std::uint64_t(n - k)));
        std::swap(permutation_[static_cast<std::size_t>(k)], permutation_[static_cast<std::size_t>(j)]);
        out.terms.push_back({permutation_[static_cast<std::size_t>(k)], c});
      }
      out.raw_size = spec_.tau;
      merge_draw(out);
      return;
    }
    case SamplingKind::Independent: {
      for (Index i = 0; i < n; ++i)
        if (uniform01(rng) < spec_.probabilities(i)) out.terms.push_back({i, 1.0 / (nd * spec_.probabilities(i))});
      out.raw_size = static_cast<Index>(out.terms.size());
      return;
    }
    case SamplingKind::ExtendedNice: {
      // Floyd's algorithm: tau distinct positions in the expanded multiset of size N.
      const auto N = static_cast<std::uint64_t>(expanded_size_);
      const auto tau = static_cast<std::uint64_t>(spec_.tau);
      chosen_.clear();
      for (std::uint64_t j = N - tau; j < N; ++j) {
        const std::uint64_t t = uniform_index(rng, j + 1);
        if (std::find(chosen_.begin(), chosen_.end(), t) == chosen_.end())
          chosen_.push_back(t);
        else
          chosen_.push_back(j);
      }
      const double scale = double(expanded_size_) / (nd * double(spec_.tau));
      for (std::uint64_t pos : chosen_) {
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), double(pos));
        const auto i = static_cast<Index>(it - cumulative_.begin());
        out.terms.push_back({i, scale / double(spec_.repeats[static_cast<std::size_t>(i)])});
      }
      out.raw_size = spec_.tau;
      merge_draw(out);
      return;
    }
    case SamplingKind::FullBatch: {
      for (Index i = 0; i < n; ++i) out.terms.push_back({i, 1.0 / nd});
      out.raw_size = n;
      return;
    }
  }
}

Draw draw(const SamplingSpec& spec, Rng& rng) {
  Sampler sampler(spec);
  Draw out;
  sampler.draw(rng, out);
  return out;
}

Vector apply(const Draw& d, const Matrix& vectors) {
  Vector out(vectors.rows()), scratch(vectors.rows());
  apply(
      d,
      [&](Index i, Eigen::Ref<Vector> buf) {
        if (i < 0 || i >= vectors.cols()) throw IndexOutOfRange("draw references a missing vector");
        buf = vectors.col(i);
      },
      out, scratch);
  return out;
}

// --- enumeration -------------------------------------------------------------

static double binomial(double n, double k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  double r = 1;
  for (double j = 1; j <= k; ++j) r = r * (n - k + j) / j;
  return std::round(r);
}

double outcome_count(const SamplingSpec& spec) {
  switch (spec.kind) {
    case SamplingKind::UniformWithReplacement:
    case SamplingKind::Importance: return std::pow(double(spec.n), double(spec.tau));
    case SamplingKind::Nice: return binomial(double(spec.n), double(spec.tau));
    case SamplingKind::Independent: return std::pow(2.0, double(spec.n));
    case SamplingKind::ExtendedNice: {
      double N = 0;
      for (Index li : spec.repeats) N += double(li);
      return binomial(N, double(spec.tau));
    }
    case SamplingKind::FullBatch: return 1;
  }
  return 0;
}

void enumerate_outcomes(const SamplingSpec& spec, const std::function<void(const Draw&, double)>& visit,
                        double budget) {
  const double count = outcome_count(spec);
  if (count > budget)
    throw BudgetExceeded("enumeration needs " + std::to_string(count) + " outcomes, budget is " +
                         std::to_string(budget));
  const Index n = spec.n;
  const double nd = double(n);
  Draw d;
  switch (spec.kind) {
    case SamplingKind::UniformWithReplacement:
    case SamplingKind::Importance: {
      const Index tau = spec.tau;
      std::vector<Index> seq(static_cast<std::size_t>(tau), 0);
      for (;;) {
        d.terms.clear();
        double prob = 1;
        for (Index i : seq) {
          const double q = spec.probabilities(i);
          prob *= q;
          d.terms.push_back({i, 1.0 / (double(tau) * nd * q)});
        }
        d.raw_size = tau;
        merge_draw(d);
        visit(d, prob);
        Index k = tau - 1;
        while (k >= 0 && ++seq[static_cast<std::size_t>(k)] == n) seq[static_cast<std::size_t>(k--)] = 0;
        if (k < 0) break;
      }
      return;
    }
    case SamplingKind::Nice: {
      const Index tau = spec.tau;
      const double prob = 1.0 / count;
      std::vector<Index> subset(static_cast<std::size_t>(tau));
      std::iota(subset.begin(), subset.end(), Index(0));
      for (;;) {
        d.terms.clear();
        for (Index i : subset) d.terms.push_back({i, 1.0 / double(tau)});
        d.raw_size = tau;
        visit(d, prob);
        Index k = tau - 1;
        while (k >= 0 && subset[static_cast<std::size_t>(k)] == n - tau + k) --k;
        if (k < 0) break;
        ++subset[static_cast<std::size_t>(k)];
        for (Index j = k + 1; j < tau; ++j) subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
      }
      return;
    }
    case SamplingKind::Independent: {
      const auto outcomes = static_cast<std::uint64_t>(count);
      for (std::uint64_t mask = 0; mask < outcomes; ++mask) {
        d.terms.clear();
        double prob = 1;
        for (Index i = 0; i < n; ++i) {
          const double p = spec.probabilities(i);
          if (mask >> i & 1u) {
            prob *= p;
            d.terms.push_back({i, 1.0 / (nd * p)});
          } else {
            prob *= 1 - p;
          }
        }
        d.raw_size = static_cast<Index>(d.terms.size());
        visit(d, prob);
      }
      return;
    }
    case SamplingKind::ExtendedNice: {
      std::vector<Index> owner;
      for (Index i = 0; i < n; ++i)
        for (Index r = 0; r < spec.repeats[static_cast<std::size_t>(i)]; ++r) owner.push_back(i);
      const auto N = static_cast<Index>(owner.size());
      const Index tau = spec.tau;
      const double scale = double(N) / (nd * double(tau));
      const double prob = 1.0 / count;
      std::vector<Index> subset(static_cast<std::size_t>(tau));
      std::iota(subset.begin(), subset.end(), Index(0));
      for (;;) {
        d.terms.clear();
        for (Index pos : subset) {
          const Index i = owner[static_cast<std::size_t>(pos)];
          d.terms.push_back({i, scale / double(spec.repeats[static_cast<std::size_t>(i)])});
        }
        d.raw_size = tau;
        merge_draw(d);
        visit(d, prob);
        Index k = tau - 1;
        while (k >= 0 && subset[static_cast<std::size_t>(k)] == N - tau + k) --k;
        if (k < 0) break;
        ++subset[static_cast<std::size_t>(k)];
        for (Index j = k + 1; j < tau; ++j) subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
      }
      return;
    }
    case SamplingKind::FullBatch: {
      for (Index i = 0; i < n; ++i) d.terms.push_back({i, 1.0 / nd});
      d.raw_size = n;
      visit(d, 1.0);
      return;
    }
  }
}

static void check_vectors(const SamplingSpec& spec, const Matrix& vectors) {
  if (vectors.cols() != spec.n) throw DimensionMismatch("need one vector per sampled index");
}

double ab_rhs(const SamplingSpec& spec, const Matrix& vectors) {
  check_vectors(spec, vectors);
  const double nd = double(spec.n);
  double weighted = 0;
  for (Index i = 0; i < spec.n; ++i) {
    const double sq = vectors.col(i).squaredNorm();
    if (sq == 0) continue;
    if (spec.w(i) == 0) return std::numeric_limits<double>::infinity();
    weighted += sq / (nd * spec.w(i));
  }
  const Vector mean = vectors.rowwise().mean();
  return spec.A * weighted / nd - spec.B * mean.squaredNorm();
}

ExactVariance variance_exact(const SamplingSpec& spec, const Matrix& vectors, double budget) {
  check_vectors(spec, vectors);
  const Vector mean = vectors.rowwise().mean();
  Vector expectation = Vector::Zero(vectors.rows());
  ExactVariance out;
  enumerate_outcomes(
      spec,
      [&](const Draw& d, double prob) {
        const Vector est = apply(d, vectors);
        expectation += prob * est;
        out.variance += prob * (est - mean).squaredNorm();
        out.expected_cardinality += prob * double(d.terms.size());
      },
      budget);
  out.rhs_bound = ab_rhs(spec, vectors);
  out.mean_error = (expectation - mean).cwiseAbs().maxCoeff();
  return out;
}

MonteCarloVariance variance_mc(const SamplingSpec& spec, const Matrix& vectors, std::int64_t trials, Rng& rng) {
  check_vectors(spec, vectors);
  if (trials < 1000) throw InvalidArgument("Monte-Carlo verification needs at least 1000 trials");
  const Index d = vectors.rows();
  const Vector mean = vectors.rowwise().mean();
  Sampler sampler(spec);
  Draw dr;
  Vector est(d), scratch(d);
  Vector sum = Vector::Zero(d), sum_sq = Vector::Zero(d);
  double err_sum = 0, err_sq_sum = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    sampler.draw(rng, dr);
    apply(dr, [&](Index i, Eigen::Ref<Vector> buf) { buf = vectors.col(i); }, est, scratch);
    const Vector dev = est - mean;
    sum += dev;
    sum_sq += dev.cwiseAbs2();
    const double e = dev.squaredNorm();
    err_sum += e;
    err_sq_sum += e * e;
  }
  const double T = double(trials);
  MonteCarloVariance out;
  out.mean_deviation = sum / T;
  out.mean_error = out.mean_deviation.norm();
  const Vector coord_var = ((sum_sq / T) - out.mean_deviation.cwiseAbs2()).cwiseMax(0.0) * (T / (T - 1));
  out.mean_standard_error = (coord_var / T).cwiseSqrt();
  out.variance_est = err_sum / T;
  const double var_of_err = std::max(0.0, err_sq_sum / T - out.variance_est * out.variance_est) * (T / (T - 1));
  out.variance_standard_error = std::sqrt(var_of_err / T);
  out.rhs_bound = ab_rhs(spec, vectors);
  out.violated = out.variance_est > out.rhs_bound + 4 * out.variance_standard_error + 1e-12 * (1 + std::abs(out.rhs_bound));
  for (Index k = 0; k < d; ++k)
    if (std::abs(out.mean_deviation(k)) > 4 * out.mean_standard_error(k) + 1e-12 * (1 + mean.cwiseAbs().maxCoeff())) out.biased = true;
  return out;
}

// --- composition -------------------------------------------------------------

void check_composition(const SamplingSpec& outer, const std::vector<SamplingSpec>& inner) {
  if (outer.B > 1) throw InvalidArgument("outer sampling must have B <= 1");
  if (static_cast<Index>(inner.size()) != outer.n)
    throw DimensionMismatch("need one inner sampling per client (" + std::to_string(outer.n) + ")");
}

ComposedVariance compose_variance(const SamplingSpec& outer, const std::vector<SamplingSpec>& inner,
                                  const std::vector<ClientConstants>& client, double outer_L_plus_w_sq,
                                  double outer_L_pm_w_sq) {
  check_composition(outer, inner);
  if (client.size() != inner.size()) throw DimensionMismatch("need constants for every client");
  const double n = double(outer.n);
  double total = 0;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    const SamplingSpec& s = inner[i];
    const double local = (s.A - s.B) * client[i].L_plus_w_sq + s.B * client[i].L_pm_w_sq;
    if (local == 0) continue;
    const double wi = outer.w(static_cast<Index>(i));
    if (wi == 0) throw InvalidArgument("outer weight is zero for a client with nonzero variance");
    total += (outer.A / (n * wi) + (1 - outer.B) / n) * local;
  }
  ComposedVariance out;
  out.effective = total / n + (outer.A - outer.B) * outer_L_plus_w_sq + outer.B * outer_L_pm_w_sq;
  return out;
}

double composed_rhs(const SamplingSpec& outer, const std::vector<SamplingSpec>& inner,
                    const std::vector<Matrix>& vectors) {
  check_composition(outer, inner);
  if (vectors.size() != inner.size()) throw DimensionMismatch("need vectors for every client");
  const double n = double(outer.n);
  Matrix client_means(vectors.front().rows(), outer.n);
  double local_total = 0;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    const double local = ab_rhs(inner[i], vectors[i]);
    client_means.col(static_cast<Index>(i)) = vectors[i].rowwise().mean();
    if (local == 0) continue;
    local_total += (outer.A / (n * outer.w(static_cast<Index>(i))) + (1 - outer.B) / n) * local;
  }
  return local_total / n + ab_rhs(outer, client_means);
}

ComposedExact composed_variance_exact(const SamplingSpec& outer, const std::vector<SamplingSpec>& inner,
                                      const std::vector<Matrix>& vectors, double budget) {
  check_composition(outer, inner);
  if (vectors.size() != inner.size()) throw DimensionMismatch("need vectors for every client");
  const Index d = vectors.front().rows();
  Vector grand = Vector::Zero(d);
  for (const auto& v : vectors) grand += v.rowwise().mean();
  grand /= double(vectors.size());

  // Inner outcome lists, enumerated once per client.
  std::vector<std::vector<std::pair<Vector, double>>> inner_outcomes(inner.size());
  double worst = 1;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    enumerate_outcomes(
        inner[i], [&](const Draw& dr, double prob) { inner_outcomes[i].emplace_back(apply(dr, vectors[i]), prob); },
        budget);
    worst *= double(inner_outcomes[i].size());
  }
  if (outcome_count(outer) * worst > budget)
    throw BudgetExceeded("joint enumeration exceeds the outcome budget");

  ComposedExact out;
  Vector expectation = Vector::Zero(d);
  enumerate_outcomes(
      outer,
      [&](const Draw& od, double outer_prob) {
        // Cartesian product over the inner outcomes of the selected clients.
        std::vector<std::size_t> pos(od.terms.size(), 0);
        bool done = false;
        while (!done) {
          Vector est = Vector::Zero(d);
          double prob = outer_prob;
          for (std::size_t k = 0; k < od.terms.size(); ++k) {
            const auto& [vec, p] = inner_outcomes[static_cast<std::size_t>(od.terms[k].index)][pos[k]];
            est += od.terms[k].coefficient * vec;
            prob *= p;
          }
          expectation += prob * est;
          out.variance += prob * (est - grand).squaredNorm();
          std::size_t k = od.terms.size();
          for (;;) {
            if (k == 0) {
              done = true;
              break;
            }
            --k;
            if (++pos[k] < inner_outcomes[static_cast<std::size_t>(od.terms[k].index)].size()) break;
            pos[k] = 0;
          }
        }
      },
      budget);
  out.rhs_bound = composed_rhs(outer, inner, vectors);
  out.mean_error = (expectation - grand).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace pagesamp
