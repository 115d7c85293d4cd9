#include "pagesamp/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pagesamp::harness {

namespace {

constexpr int kFormatVersion = 1;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

/// Collects conversion failures instead of stopping at the first.
class Reader {
 public:
  explicit Reader(const Settings& s) : settings_(s) {}

  std::string text(const std::string& key) const { return settings_.get(key); }
  bool present(const std::string& key) const { return !settings_.get(key).empty(); }

  double real(const std::string& key) {
    const std::string t = text(key);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
      fail(key + ": expected a number, got '" + t + "'");
      return 0;
    }
    return v;
  }

  std::int64_t integer(const std::string& key, std::int64_t lo) {
    const std::string t = text(key);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
      fail(key + ": expected an integer, got '" + t + "'");
      return lo;
    }
    if (v < lo) {
      fail(key + ": must be at least " + std::to_string(lo) + ", got " + t);
      return lo;
    }
    return v;
  }

  bool boolean(const std::string& key) {
    const std::string t = text(key);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no" || t.empty()) return false;
    fail(key + ": expected true or false, got '" + t + "'");
    return false;
  }

  template <typename F>
  auto parsed(const std::string& key, F&& parse, decltype(parse(std::string())) fallback) {
    try {
      return parse(text(key));
    } catch (const std::exception& e) {
      fail(key + ": " + e.what());
      return fallback;
    }
  }

  void fail(std::string message) { problems.push_back(std::move(message)); }

  std::vector<std::string> problems;

 private:
  const Settings& settings_;
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : InvalidArgument(join(problems)), problems_(std::move(problems)) {}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"kind", "problem", "", "generate a task: lpm | li"},
      {"n", "problem", "1000", "number of components"},
      {"d", "problem", "10", "dimension"},
      {"lambda", "problem", "0.001", "smallest mean-Hessian eigenvalue (lpm) or logistic penalty"},
      {"s", "problem", "0.5", "heterogeneity level"},
      {"seed", "problem", "1", "task generation seed"},
      {"task", "problem", "", "load a task file"},
      {"dataset", "problem", "", "load a LIBSVM dataset"},
      {"clients", "problem", "0", "shard the dataset over this many clients (0 keeps one level)"},
      {"shard_seed", "problem", "0", "sharding permutation seed"},
      {"groups", "problem", "0", "stratify quadratic components into this many clients"},
      {"stratify", "problem", "contiguous", "contiguous | by-li"},
      {"example", "problem", "", "analytic example 1 | 2 | 3"},
      {"a", "problem", "5", "example parameter a"},
      {"b", "problem", "2", "example parameter b"},
      {"g", "problem", "3", "example groups"},
      {"m", "problem", "2", "example points per group"},
      {"method", "sampling", "uniform-new",
       "vanilla | uniform-new | importance | nice | independent | extended-nice | full-batch | composed"},
      {"tau", "sampling", "1", "batch size"},
      {"outer", "sampling", "uniform", "composed outer sampling: uniform | nice | full-batch"},
      {"inner", "sampling", "uniform", "composed inner sampling: uniform | nice | full-batch"},
      {"tau_clients", "sampling", "1", "composed outer batch size"},
      {"tau_points", "sampling", "1", "composed inner batch size"},
      {"constants", "sampling", "auto", "auto | exact | bound"},
      {"repeats", "sampling", "ones", "extended-nice copies: ones | lipschitz"},
      {"gamma", "run", "", "stepsize override"},
      {"p", "run", "", "refresh probability override"},
      {"pl", "run", "false", "use the PL stepsize"},
      {"mu", "run", "", "PL constant (quadratics default to the smallest mean-Hessian eigenvalue)"},
      {"iterations", "run", "", "iteration count (default from epsilon and delta0)"},
      {"epsilon", "run", "0.001", "target squared gradient norm"},
      {"delta0", "run", "", "f(x0) - f* override"},
      {"seeds", "run", "1-10", "run seeds: list and ranges, e.g. 1-10 or 1,4,7"},
      {"output_rule", "run", "uniform", "uniform | last | best"},
      {"monitor_every", "run", "0", "record cadence (0 = T / 500)"},
      {"monitor_growth", "run", "0", "geometric record spacing factor (> 1 enables)"},
      {"accounting", "run", "per-index", "per-index | per-evaluation"},
      {"workers", "run", "0", "worker threads (0 = hardware concurrency)"},
      {"out", "output", "", "output directory (generate: task file path)"},
      {"trials", "verify", "100000", "Monte Carlo draws"},
      {"instances", "verify", "20", "random instances per exact check"},
      {"verify", "verify", "all", "sampling kind to verify, or all"},
  };
  return keys;
}

std::string Settings::get(const std::string& key) const {
  if (const auto it = values.find(key); it != values.end()) return it->second;
  if (const auto* k = find_key(key)) return k->fallback;
  return {};
}

Settings parse_config(std::istream& in) {
  Settings s;
  std::string line, section;
  std::int64_t lineno = 0;
  bool versioned = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", lineno);
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!versioned) {
      if (key != "format_version" || !section.empty()) throw ParseError("first entry must be format_version", lineno);
      if (value != std::to_string(kFormatVersion))
        throw ParseError("unsupported format_version " + value, lineno);
      versioned = true;
      continue;
    }
    if (section == "grid") {
      if (!find_key(key)) throw ParseError("unknown grid key '" + key + "'", lineno);
      s.grid[key] = value;
      continue;
    }
    const auto* k = find_key(key);
    if (!k) throw ParseError("unknown key '" + key + "'", lineno);
    if (!section.empty() && k->section != section)
      throw ParseError("key '" + key + "' belongs in [" + k->section + "]", lineno);
    s.values[key] = value;
  }
  if (!versioned) throw ParseError("missing format_version", 0);
  return s;
}

Settings load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path + "'");
  return parse_config(in);
}

Settings merge(const Settings& base, const Settings& overrides) {
  Settings out = base;
  for (const auto& [k, v] : overrides.values) out.values[k] = v;
  for (const auto& [k, v] : overrides.grid) out.grid[k] = v;
  return out;
}

std::string default_output_dir() {
  if (const char* env = std::getenv("PAGESAMP_OUTPUT_DIR"); env && *env) return env;
  return "results";
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text)) {
    const auto dash = item.find('-', 1);
    try {
      std::size_t used = 0;
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } else {
        const std::string lo_text = item.substr(0, dash), hi_text = item.substr(dash + 1);
        const auto lo = std::stoull(lo_text, &used);
        if (used != lo_text.size()) throw std::invalid_argument(item);
        const auto hi = std::stoull(hi_text, &used);
        if (used != hi_text.size() || hi < lo || hi - lo > 100000) throw std::invalid_argument(item);
        for (auto v = lo; v <= hi; ++v) seeds.push_back(v);
      }
    } catch (const std::logic_error&) {
      throw InvalidArgument("bad seed list entry '" + item + "'");
    }
  }
  if (seeds.empty()) throw InvalidArgument("empty seed list");
  return seeds;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Vanilla: return "vanilla";
    case Method::UniformNew: return "uniform-new";
    case Method::Importance: return "importance";
    case Method::Nice: return "nice";
    case Method::Independent: return "independent";
    case Method::ExtendedNice: return "extended-nice";
    case Method::FullBatch: return "full-batch";
    case Method::Composed: return "composed";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  for (Method m : {Method::Vanilla, Method::UniformNew, Method::Importance, Method::Nice, Method::Independent,
                   Method::ExtendedNice, Method::FullBatch, Method::Composed})
    if (to_string(m) == text) return m;
  throw InvalidArgument("unknown method '" + text + "'");
}

ExperimentConfig make_config(const Settings& settings) {
  Reader r(settings);
  ExperimentConfig cfg;

  int sources = 0;
  if (r.present("kind")) {
    ++sources;
    cfg.generator = r.parsed("kind", [](const std::string& t) { return std::optional(parse_task_kind(t)); },
                             std::optional<TaskKind>{});
  }
  if (r.present("task")) ++sources, cfg.task_path = r.text("task");
  if (r.present("dataset")) ++sources, cfg.dataset_path = r.text("dataset");
  if (r.present("example")) {
    ++sources;
    cfg.example = static_cast<int>(r.integer("example", 1));
    if (cfg.example > 3) r.fail("example: must be 1, 2 or 3");
  }
  if (sources != 1) r.fail("exactly one of kind, task, dataset, example must be given (got " +
                           std::to_string(sources) + ")");

  cfg.n = r.integer("n", 1);
  cfg.d = r.integer("d", 1);
  cfg.lambda = r.real("lambda");
  if (cfg.lambda < 0) r.fail("lambda: must be nonnegative");
  cfg.s = r.real("s");
  if (cfg.s < 0) r.fail("s: must be nonnegative");
  cfg.seed = static_cast<std::uint64_t>(r.integer("seed", 0));
  cfg.clients = r.integer("clients", 0);
  cfg.shard_seed = static_cast<std::uint64_t>(r.integer("shard_seed", 0));
  cfg.groups = r.integer("groups", 0);
  cfg.stratify = r.parsed("stratify", parse_stratify_rule, StratifyRule::Contiguous);
  cfg.a = r.real("a");
  cfg.b = r.real("b");
  cfg.g = r.integer("g", 1);
  cfg.m = r.integer("m", 1);

  cfg.method = r.parsed("method", parse_method, Method::UniformNew);
  cfg.tau = r.integer("tau", 1);
  cfg.outer = r.parsed("outer", parse_sampling_kind, SamplingKind::UniformWithReplacement);
  cfg.inner = r.parsed("inner", parse_sampling_kind, SamplingKind::UniformWithReplacement);
  for (const char* key : {"outer", "inner"}) {
    const auto kind = key[0] == 'o' ? cfg.outer : cfg.inner;
    if (kind != SamplingKind::UniformWithReplacement && kind != SamplingKind::Nice &&
        kind != SamplingKind::FullBatch)
      r.fail(std::string(key) + ": composed runs support uniform, nice and full-batch");
  }
  cfg.tau_clients = r.integer("tau_clients", 1);
  cfg.tau_points = r.integer("tau_points", 1);
  cfg.constants = r.parsed("constants", parse_constants_mode, ConstantsMode::Auto);
  const std::string repeats = r.text("repeats");
  if (repeats == "lipschitz") cfg.lipschitz_repeats = true;
  else if (repeats != "ones") r.fail("repeats: expected ones or lipschitz, got '" + repeats + "'");

  const bool two_level = cfg.groups > 0 || (!cfg.dataset_path.empty() && cfg.clients > 0);
  if (cfg.method == Method::Composed && sources == 1 && !two_level && cfg.example != 3)
    r.fail("method composed needs a two-level problem (groups, clients or example 3)");
  if (cfg.method != Method::Composed && two_level)
    r.fail("groups and clients need method composed");

  if (r.present("gamma")) {
    cfg.gamma = r.real("gamma");
    if (!(*cfg.gamma > 0)) r.fail("gamma: must be positive");
  }
  if (r.present("p")) {
    cfg.p = r.real("p");
    if (!(*cfg.p > 0 && *cfg.p <= 1)) r.fail("p: must lie in (0, 1]");
  }
  cfg.pl = r.boolean("pl");
  if (r.present("mu")) {
    cfg.mu = r.real("mu");
    if (!(*cfg.mu > 0)) r.fail("mu: must be positive");
  }
  if (r.present("iterations")) cfg.iterations = r.integer("iterations", 1);
  cfg.epsilon = r.real("epsilon");
  if (!(cfg.epsilon > 0)) r.fail("epsilon: must be positive");
  if (r.present("delta0")) {
    cfg.delta0 = r.real("delta0");
    if (!(*cfg.delta0 > 0)) r.fail("delta0: must be positive");
  }
  cfg.seeds = r.parsed("seeds", parse_seeds, std::vector<std::uint64_t>{1});
  cfg.output_rule = r.parsed("output_rule", parse_output_rule, OutputRule::UniformRandomIterate);
  cfg.monitor.every = r.integer("monitor_every", 0);
  cfg.monitor.growth = r.real("monitor_growth");
  if (cfg.monitor.growth != 0 && !(cfg.monitor.growth > 1)) r.fail("monitor_growth: must be 0 or above 1");
  const std::string accounting = r.text("accounting");
  if (accounting == "per-evaluation") cfg.accounting = CallAccounting::PerEvaluation;
  else if (accounting != "per-index") r.fail("accounting: expected per-index or per-evaluation");
  cfg.workers = static_cast<unsigned>(r.integer("workers", 0));
  cfg.out = r.present("out") ? r.text("out") : default_output_dir();

  if (!r.problems.empty()) throw ConfigError(r.problems);
  return cfg;
}

}  // namespace pagesamp::harness
