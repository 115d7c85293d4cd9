#pragma once

#include "pagesamp/grouped.hpp"
#include "pagesamp/quadratic.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

namespace pagesamp {

enum class TaskKind { ControlledLpm, ControlledLi };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

struct TaskMetadata {
  TaskKind kind = TaskKind::ControlledLpm;
  Index n = 0;
  Index d = 0;
  double lambda = 0;
  double s = 0;
  std::uint64_t seed = 0;
};

struct QuadraticTask {
  std::shared_ptr<const QuadraticProblem> problem;
  TaskMetadata meta;
  Vector scales;   // per-component stencil scale nu_i / 4
  double shift = 0;
};

/// Homogeneity-controlled task: nu_i = 1 + s xi_i, b_i = (nu_i / 4)(-1 + s zeta_i, 0, ..., 0),
/// A_i = (nu_i / 4) tridiag(-1, 2, -1), all shifted so the mean Hessian has
/// smallest eigenvalue lambda.
QuadraticTask gen_controlled_lpm(Index n, Index d, double lambda, double s, std::uint64_t seed);

/// Lipschitz-controlled task: nu_i = 1 + s xi_i with xi_i ~ Exp(1),
/// b_i = (-1/4 + s zeta_i, 0, ..., 0), A_i = (nu_i / 4) tridiag(-1, 2, -1), no shift.
QuadraticTask gen_controlled_li(Index n, Index d, double s, std::uint64_t seed);

void write_task(std::ostream& out, const QuadraticTask& task);
QuadraticTask read_task(std::istream& in);
void save_task(const std::string& path, const QuadraticTask& task);
QuadraticTask load_task(const std::string& path);

/// Closed-form constants of the one-dimensional examples.
struct ExampleConstants {
  double L_minus = 0;
  double L_plus_sq = 0;
  double L_pm_sq = 0;
  double mean_L = 0;                 // (1/n) sum L_i
  std::optional<Vector> client_L_pm_sq;  // per client, grouped examples
  /// Predicted ratio of leading complexity terms against the baseline of the example.
  double complexity_ratio = 0;
};

struct ExampleParams {
  Index n = 2;
  double a = 1;
  double b = 1;
  Index g = 2;   // groups (Example 3)
  Index m = 2;   // points per group (Example 3)
};

struct ExampleFixture {
  std::shared_ptr<const QuadraticProblem> problem;   // single-level problem
  std::optional<GroupedProblem> grouped;             // Example 3
  ExampleConstants constants;
};

/// Example 1: n even, f_i = ((a + b) / 2) x^2 for the first half and ((b - a) / 2) x^2 for the rest.
/// Example 2: f_1 = (b / 2) x^2, f_i = 0 otherwise.
/// Example 3: g groups of m points, f_1j = (b / 2) x^2 in group 1, zero elsewhere.
ExampleFixture example_fixture(int which, const ExampleParams& params);

enum class StratifyRule { Contiguous, ByLipschitz };

StratifyRule parse_stratify_rule(const std::string& text);

/// Splits the n components into g equal groups.
GroupedProblem stratify(std::shared_ptr<const Problem> problem, Index g, StratifyRule rule);

}  // namespace pagesamp
