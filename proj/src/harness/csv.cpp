#include "pagesamp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace pagesamp::harness {

namespace {

constexpr const char* kTraceHeader = "iter,calls,grad_norm_sq,objective,refreshed";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records)
    out << r.iteration << ',' << r.calls << ',' << fmt(r.grad_norm_sq) << ',' << fmt(r.objective) << ','
        << (r.refreshed ? 1 : 0) << '\n';
}

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::string line;
  std::int64_t lineno = 1;
  if (!std::getline(in, line) || line != kTraceHeader) throw ParseError("expected trace header", 1);
  std::vector<TraceRecord> records;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw ParseError("expected 5 fields", lineno);
    TraceRecord r;
    try {
      r.iteration = std::stoll(fields[0]);
      r.calls = std::stoll(fields[1]);
      r.grad_norm_sq = std::stod(fields[2]);
      r.objective = std::stod(fields[3]);
      r.refreshed = fields[4] == "1";
    } catch (const std::logic_error&) {
      throw ParseError("malformed number", lineno);
    }
    records.push_back(r);
  }
  return records;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

std::vector<AggregateRow> aggregate(const std::vector<const Trace*>& traces, int points) {
  if (traces.empty() || points < 2) return {};
  std::int64_t lo = 0, hi = 0;
  for (const Trace* t : traces) {
    if (t->records.empty()) continue;
    lo = std::max(lo, t->records.front().calls);
    hi = std::max(hi, t->records.back().calls);
  }
  std::vector<AggregateRow> rows;
  std::int64_t previous = -1;
  for (int k = 0; k < points; ++k) {
    const auto budget = static_cast<std::int64_t>(
        std::llround(double(lo) + (double(hi) - double(lo)) * double(k) / double(points - 1)));
    if (budget == previous) continue;
    previous = budget;
    std::vector<double> values;
    for (const Trace* t : traces) {
      const auto it = std::upper_bound(t->records.begin(), t->records.end(), budget,
                                       [](std::int64_t b, const TraceRecord& r) { return b < r.calls; });
      if (it != t->records.begin()) values.push_back(std::prev(it)->grad_norm_sq);
    }
    if (values.empty()) continue;
    rows.push_back({budget, quantile(values, 0.5), quantile(values, 0.25), quantile(values, 0.75)});
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "calls,median,q25,q75\n";
  for (const auto& r : rows) out << r.calls << ',' << fmt(r.median) << ',' << fmt(r.q25) << ',' << fmt(r.q75) << '\n';
}

}  // namespace pagesamp::harness
