#pragma once

#include "pagesamp/grouped.hpp"
#include "pagesamp/objective.hpp"
#include "pagesamp/sampling.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pagesamp {

enum class OutputRule { UniformRandomIterate, LastIterate, BestGradientIterate };

std::string to_string(OutputRule rule);
OutputRule parse_output_rule(const std::string& text);

/// How non-refresh steps are charged: one call per sampled index (the default,
/// consistent with expected_complexity), or one call per gradient evaluation,
/// i.e. two per sampled index.
enum class CallAccounting { PerSampledIndex, PerEvaluation };

/// When trace records (with an uncounted full gradient) are taken.
struct MonitorSchedule {
  /// Linear cadence: every `every` iterations; 0 selects max(1, T / 500).
  std::int64_t every = 0;
  /// When positive, records are instead taken at iterations that grow
  /// geometrically by this factor (plus iteration 0 and T).
  double growth = 0;
};

struct PageConfig {
  double gamma = 0;
  double p = 1;
  std::int64_t iterations = 0;
  std::uint64_t seed = 1;
  OutputRule output_rule = OutputRule::UniformRandomIterate;
  MonitorSchedule monitor;
  CallAccounting accounting = CallAccounting::PerSampledIndex;
  std::optional<Vector> x0;          // defaults to problem.initial_point()
  std::optional<double> f_star;      // defaults to problem.optimal_value()
};

struct TraceRecord {
  std::int64_t iteration = 0;
  std::int64_t calls = 0;
  double grad_norm_sq = 0;
  double objective = 0;
  bool refreshed = false;
  double estimator_error_sq = 0;   // |g^t - grad f(x^t)|^2
  double lyapunov = std::numeric_limits<double>::quiet_NaN();
};

struct Trace {
  std::vector<TraceRecord> records;
  Vector final_point;
  Vector selected_point;
  std::int64_t selected_iteration = 0;
  double selected_grad_norm_sq = 0;
  double delta0 = 0;
  std::int64_t refreshes = 0;
  std::int64_t total_calls = 0;
  double gamma = 0;
  double p = 0;
  std::int64_t iterations = 0;
};

// --- parameter selection -------------------------------------------------------

/// 1 / (L_- + sqrt((1-p)/p ((A-B) L_{+,w}^2 + B L_{+-,w}^2))).
double stepsize_nonconvex(double L_minus, double A, double B, double L_plus_w_sq, double L_pm_w_sq, double p);

/// min{1 / (L_- + sqrt(2(1-p)/p (...))), p / (2 mu)}.
double stepsize_pl(double L_minus, double A, double B, double L_plus_w_sq, double L_pm_w_sq, double p, double mu);

double stepsize_composed(double L_minus, const ComposedVariance& composed, double p);

/// cardinality / (cardinality + n).
double default_p(double cardinality, Index n);

/// Smallest T with 2 delta0 / (gamma T) <= epsilon.
std::int64_t iteration_budget(double delta0, double epsilon, double gamma);

/// n + 2 cardinality T.
double expected_complexity(Index n, double cardinality, std::int64_t T);

/// n + (p n + (1 - p) cardinality) T, the exact expectation under per-index accounting.
double expected_calls(Index n, double cardinality, double p, std::int64_t T);

// --- runners -------------------------------------------------------------------

Trace run_page(const Problem& problem, const SamplingSpec& spec, const PageConfig& cfg);

Trace run_page_composed(const GroupedProblem& problem, const SamplingSpec& outer,
                        const std::vector<SamplingSpec>& inner, const PageConfig& cfg);

/// Iterations at which records are taken for a run of length T.
std::vector<std::int64_t> monitor_iterations(const MonitorSchedule& schedule, std::int64_t T);

/// Calls at the first record with grad_norm_sq <= epsilon, if any.
std::optional<std::int64_t> calls_to_reach(const Trace& trace, double epsilon);

}  // namespace pagesamp
