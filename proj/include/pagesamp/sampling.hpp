#pragma once

#include "pagesamp/linalg.hpp"
#include "pagesamp/random.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pagesamp {

enum class SamplingKind { UniformWithReplacement, Importance, Nice, Independent, ExtendedNice, FullBatch };

std::string to_string(SamplingKind kind);
SamplingKind parse_sampling_kind(const std::string& text);

/// A sampling over [0, n) together with the constants (A, B, w) of its
/// weighted AB inequality and its expected cardinality.
struct SamplingSpec {
  SamplingKind kind = SamplingKind::FullBatch;
  Index n = 0;
  Index tau = 0;                 // batch size; unused for Independent and FullBatch
  Vector probabilities;          // q for Importance, p for Independent
  std::vector<Index> repeats;    // l for ExtendedNice
  double A = 0;
  double B = 0;
  Vector w;
  double expected_cardinality = 0;
};

struct SamplingParams {
  Index tau = 1;
  Vector q;
  Vector p;
  std::vector<Index> l;
};

SamplingSpec uniform_with_replacement(Index n, Index tau);
SamplingSpec importance(const Vector& q, Index tau);
SamplingSpec nice(Index n, Index tau);
SamplingSpec independent(const Vector& p);
SamplingSpec extended_nice(const std::vector<Index>& l, Index tau);
SamplingSpec full_batch(Index n);
SamplingSpec build(SamplingKind kind, const SamplingParams& params, Index n);

/// Importance probabilities proportional to L: q_i = L_i / sum L.
Vector optimal_importance_weights(const Vector& L);

struct Term {
  Index index;
  double coefficient;
};

/// One realization of a sampling: the estimator is sum coefficient * a_index.
/// Terms are sorted by index with repeated indices merged; raw_size counts
/// the draws before merging.
struct Draw {
  std::vector<Term> terms;
  Index raw_size = 0;
};

/// Stateful sampler reusing its buffers across draws.
class Sampler {
 public:
  explicit Sampler(SamplingSpec spec);
  const SamplingSpec& spec() const { return spec_; }
  void draw(Rng& rng, Draw& out);

 private:
  Index categorical(Rng& rng) const;

  SamplingSpec spec_;
  std::vector<double> cumulative_;      // Importance: cumulative q; ExtendedNice: prefix sums of l
  std::vector<Index> permutation_;      // Nice
  std::vector<std::uint64_t> chosen_;   // ExtendedNice
  std::int64_t expanded_size_ = 0;
};

Draw draw(const SamplingSpec& spec, Rng& rng);

/// out = sum coefficient * oracle(index). `oracle(i, buffer)` writes into buffer.
/// Every call site that needs bitwise agreement goes through this function.
template <typename Oracle>
void apply(const Draw& d, Oracle&& oracle, Eigen::Ref<Vector> out, Eigen::Ref<Vector> scratch) {
  out.setZero();
  for (const Term& t : d.terms) {
    oracle(t.index, scratch);
    out += t.coefficient * scratch;
  }
}

/// Estimator for fixed vectors (columns of `vectors`).
Vector apply(const Draw& d, const Matrix& vectors);

/// Number of outcomes the exact enumeration would visit (as a double to avoid overflow).
double outcome_count(const SamplingSpec& spec);

/// Visits every outcome with its probability. Throws BudgetExceeded when
/// outcome_count exceeds `budget`.
void enumerate_outcomes(const SamplingSpec& spec, const std::function<void(const Draw&, double)>& visit,
                        double budget = 1e6);

/// Right-hand side (A/n) sum |a_i|^2 / (n w_i) - B |mean a|^2.
double ab_rhs(const SamplingSpec& spec, const Matrix& vectors);

struct ExactVariance {
  double variance = 0;
  double rhs_bound = 0;
  double mean_error = 0;          // |E[estimator] - mean a| (max abs coordinate)
  double expected_cardinality = 0;  // E[number of distinct indices]
};

ExactVariance variance_exact(const SamplingSpec& spec, const Matrix& vectors, double budget = 1e6);

struct MonteCarloVariance {
  double mean_error = 0;       // |mean of draws - mean a|
  Vector mean_deviation;       // per coordinate (mean of draws - mean a)
  Vector mean_standard_error;  // per coordinate
  double variance_est = 0;
  double variance_standard_error = 0;
  double rhs_bound = 0;
  bool violated = false;       // variance_est > rhs_bound + 4 SE
  bool biased = false;         // some coordinate deviates by more than 4 SE
};

MonteCarloVariance variance_mc(const SamplingSpec& spec, const Matrix& vectors, std::int64_t trials, Rng& rng);

// --- composition of samplings ------------------------------------------------

struct ClientConstants {
  double L_plus_w_sq = 0;
  double L_pm_w_sq = 0;
};

struct ComposedVariance {
  double effective = 0;
};

/// Variance constant of the outer-of-inner estimator:
/// (1/n) sum_i (A/(n w_i) + (1-B)/n) ((A_i - B_i) L_{i,+}^2 + B_i L_{i,+-}^2) + (A - B) L_+^2 + B L_+-^2.
ComposedVariance compose_variance(const SamplingSpec& outer, const std::vector<SamplingSpec>& inner,
                                  const std::vector<ClientConstants>& client, double outer_L_plus_w_sq,
                                  double outer_L_pm_w_sq);

/// Right-hand side of the composed variance bound for fixed vectors;
/// vectors[i] holds client i's points as columns.
double composed_rhs(const SamplingSpec& outer, const std::vector<SamplingSpec>& inner,
                    const std::vector<Matrix>& vectors);

struct ComposedExact {
  double variance = 0;
  double rhs_bound = 0;
  double mean_error = 0;
};

/// Exact variance of the composed estimator by joint enumeration.
ComposedExact composed_variance_exact(const SamplingSpec& outer, const std::vector<SamplingSpec>& inner,
                                      const std::vector<Matrix>& vectors, double budget = 1e6);

void check_composition(const SamplingSpec& outer, const std::vector<SamplingSpec>& inner);

}  // namespace pagesamp
