#pragma once

#include "pagesamp/data.hpp"
#include "pagesamp/errors.hpp"
#include "pagesamp/page.hpp"
#include "pagesamp/taskgen.hpp"

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pagesamp::harness {

enum ExitCode : int { Success = 0, ConfigFailure = 1, VerificationFailure = 2, NumericalDivergence = 3 };

/// Every validation problem found, one per line.
class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct ConfigKey {
  std::string name;
  std::string section;
  std::string fallback;   // empty means unset
  std::string help;
};

/// Keys accepted in config files ([section] then `key = value`) and as `--key value` flags.
const std::vector<ConfigKey>& config_keys();

/// Flat key-value settings. Grid entries (sweep lists) are kept apart.
struct Settings {
  std::map<std::string, std::string> values;
  std::map<std::string, std::string> grid;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get(const std::string& key) const;   // value or registered default
  void set(const std::string& key, const std::string& value) { values[key] = value; }
};

Settings parse_config(std::istream& in);
Settings load_config(const std::string& path);
/// Later entries win.
Settings merge(const Settings& base, const Settings& overrides);

std::string default_output_dir();   // PAGESAMP_OUTPUT_DIR or "results"

std::vector<std::uint64_t> parse_seeds(const std::string& text);
std::vector<std::string> split_list(const std::string& text);

enum class Method { Vanilla, UniformNew, Importance, Nice, Independent, ExtendedNice, FullBatch, Composed };

std::string to_string(Method method);
Method parse_method(const std::string& text);

struct ExperimentConfig {
  // problem source: exactly one of kind / task / dataset / example
  std::optional<TaskKind> generator;
  Index n = 1000, d = 10;
  double lambda = 0.001, s = 0.5;
  std::uint64_t seed = 1;
  std::string task_path;
  std::string dataset_path;
  Index clients = 10;
  std::uint64_t shard_seed = 0;
  Index groups = 0;
  StratifyRule stratify = StratifyRule::Contiguous;
  int example = 0;
  double a = 5, b = 2;
  Index g = 3, m = 2;

  Method method = Method::UniformNew;
  Index tau = 1;
  SamplingKind outer = SamplingKind::UniformWithReplacement;
  SamplingKind inner = SamplingKind::UniformWithReplacement;
  Index tau_clients = 1, tau_points = 1;
  ConstantsMode constants = ConstantsMode::Auto;
  bool lipschitz_repeats = false;

  std::optional<double> gamma;   // override
  std::optional<double> p;       // override
  bool pl = false;
  std::optional<double> mu;
  std::optional<std::int64_t> iterations;
  double epsilon = 1e-3;
  std::optional<double> delta0;
  std::vector<std::uint64_t> seeds;
  OutputRule output_rule = OutputRule::UniformRandomIterate;
  MonitorSchedule monitor;
  CallAccounting accounting = CallAccounting::PerSampledIndex;
  unsigned workers = 0;
  std::string out;
};

/// Validates everything and throws ConfigError listing every problem.
ExperimentConfig make_config(const Settings& settings);

struct PreparedProblem {
  std::shared_ptr<const Problem> problem;   // single-level (client level when grouped)
  std::optional<GroupedProblem> grouped;
  std::optional<QuadraticTask> task;
  std::optional<ExampleFixture> fixture;
  std::string description;
};

PreparedProblem prepare_problem(const ExperimentConfig& cfg);

/// Sampling, constants and parameters of one method on one problem.
struct MethodPlan {
  Method method = Method::UniformNew;
  SamplingSpec spec;                  // outer sampling when composed
  std::vector<SamplingSpec> inner;    // composed only
  double L_minus = 0;
  double L_plus_w_sq = 0;
  double L_pm_w_sq = 0;
  double variance = 0;                // (A-B) L_+^2 + B L_+-^2, or the composed constant
  double cardinality = 0;
  Index ground = 0;                   // components charged by a refresh
  double gamma = 0;
  double p = 0;
  double delta0 = 0;
  std::int64_t iterations = 0;
  double predicted_calls = 0;
};

MethodPlan plan_method(const ExperimentConfig& cfg, const PreparedProblem& prepared);

Trace run_seed(const PreparedProblem& prepared, const MethodPlan& plan, const ExperimentConfig& cfg,
               std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  Trace trace;
};

/// Runs every seed, concurrently up to cfg.workers.
std::vector<SeedResult> run_seeds(const PreparedProblem& prepared, const MethodPlan& plan,
                                  const ExperimentConfig& cfg);

// --- CSV -----------------------------------------------------------------------------

void write_trace_csv(std::ostream& out, const Trace& trace);
std::vector<TraceRecord> read_trace_csv(std::istream& in);

struct AggregateRow {
  std::int64_t calls = 0;
  double median = 0;
  double q25 = 0;
  double q75 = 0;
};

/// Median and quartiles of grad_norm_sq across traces on a shared call-budget grid;
/// each trace contributes its last record at or below the budget.
std::vector<AggregateRow> aggregate(const std::vector<const Trace*>& traces, int points = 200);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

double quantile(std::vector<double> values, double q);

// --- commands ------------------------------------------------------------------------

int cmd_generate(const Settings& settings, std::ostream& out);
int cmd_run(const Settings& settings, std::ostream& out);
int cmd_sweep(const Settings& settings, std::ostream& out);
int cmd_verify(const Settings& settings, std::ostream& out);
int cmd_constants(const Settings& settings, std::ostream& out);

/// Rows of the complexity table printed by cmd_constants.
struct ConstantsRow {
  std::string name;
  double L_plus_w_sq = 0;
  double L_pm_w_sq = 0;
  double gamma = 0;
  double p = 0;
  double cardinality = 0;
  std::optional<std::int64_t> iterations;
  std::optional<double> predicted_calls;
  double leading_term = 0;   // cardinality-free complexity driver
};

struct ConstantsReport {
  SmoothnessReport smoothness;
  std::optional<double> empirical_pm_sq;
  std::vector<ConstantsRow> rows;
  std::map<std::string, double> ratios;
};

ConstantsReport compute_constants(const ExperimentConfig& cfg, const PreparedProblem& prepared);

}  // namespace pagesamp::harness
