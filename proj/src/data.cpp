#include "pagesamp/data.hpp"

#include "pagesamp/errors.hpp"
#include "pagesamp/random.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pagesamp {

namespace {

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(out);
}

bool parse_index(const std::string& s, long long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoll(s.c_str(), &end, 10);
  return end == s.c_str() + s.size() && errno != ERANGE;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))); }

double sigmoid(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

}  // namespace

SparseDataset parse_libsvm(std::istream& in) {
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> raw;
  std::vector<double> distinct;
  std::string line;
  std::int64_t lineno = 0;
  Index max_col = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    double label = 0;
    if (!parse_double(token, label)) throw ParseError("malformed label '" + token + "'", lineno);
    if (std::find(distinct.begin(), distinct.end(), label) == distinct.end()) {
      distinct.push_back(label);
      if (distinct.size() > 2) throw ParseError("more than two classes", lineno);
    }
    const auto row = static_cast<Index>(raw.size());
    raw.push_back(label);
    long long previous = 0;
    while (ls >> token) {
      const auto colon = token.find(':');
      long long idx = 0;
      double v = 0;
      if (colon == std::string::npos || !parse_index(token.substr(0, colon), idx) ||
          !parse_double(token.substr(colon + 1), v))
        throw ParseError("malformed feature '" + token + "'", lineno);
      if (idx < 1) throw ParseError("feature indices start at 1", lineno);
      if (idx <= previous) throw ParseError("feature indices must be strictly increasing", lineno);
      previous = idx;
      triplets.emplace_back(row, static_cast<Index>(idx - 1), v);
      max_col = std::max<Index>(max_col, static_cast<Index>(idx));
    }
  }
  if (distinct.size() != 2) throw ParseError("expected exactly two classes, found " + std::to_string(distinct.size()), 0);
  std::sort(distinct.begin(), distinct.end());
  SparseDataset data;
  data.raw_labels = {distinct[0], distinct[1]};
  data.features.resize(static_cast<Index>(raw.size()), max_col);
  data.features.setFromTriplets(triplets.begin(), triplets.end());
  data.features.makeCompressed();
  data.labels.reserve(raw.size());
  for (double r : raw) data.labels.push_back(r == distinct[0] ? 1 : 2);
  return data;
}

SparseDataset load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  return parse_libsvm(in);
}

void write_libsvm(std::ostream& out, const SparseDataset& data) {
  for (Index i = 0; i < data.rows(); ++i) {
    out << fmt(data.raw_labels[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)] - 1)]);
    for (SparseRows::InnerIterator it(data.features, i); it; ++it) out << ' ' << it.col() + 1 << ':' << fmt(it.value());
    out << '\n';
  }
}

SparseDataset subset(const SparseDataset& data, const std::vector<Index>& rows) {
  std::vector<Eigen::Triplet<double>> triplets;
  SparseDataset out;
  out.raw_labels = data.raw_labels;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index i = rows[r];
    if (i < 0 || i >= data.rows()) throw IndexOutOfRange("row index out of range");
    for (SparseRows::InnerIterator it(data.features, i); it; ++it)
      triplets.emplace_back(static_cast<Index>(r), it.col(), it.value());
    out.labels.push_back(data.labels[static_cast<std::size_t>(i)]);
  }
  out.features.resize(static_cast<Index>(rows.size()), data.dim());
  out.features.setFromTriplets(triplets.begin(), triplets.end());
  out.features.makeCompressed();
  return out;
}

// --- logistic objective ------------------------------------------------------------

LogisticProblem::LogisticProblem(std::shared_ptr<const SparseDataset> data, double lambda)
    : data_(std::move(data)), lambda_(lambda) {
  if (!data_ || data_->rows() == 0) throw InvalidArgument("logistic problem needs a nonempty dataset");
  if (!(lambda_ >= 0) || !std::isfinite(lambda_)) throw InvalidArgument("lambda must be nonnegative");
  row_norm_sq_.resize(data_->rows());
  for (Index i = 0; i < data_->rows(); ++i) {
    double s = 0;
    for (SparseRows::InnerIterator it(data_->features, i); it; ++it) s += it.value() * it.value();
    row_norm_sq_(i) = s;
  }
}

double LogisticProblem::margin(Index i, const Vector& x) const {
  const Index d = data_->dim();
  const bool first = data_->labels[static_cast<std::size_t>(i)] == 1;
  const Index own = first ? 0 : d;
  const Index other = first ? d : 0;
  double u = 0;
  for (SparseRows::InnerIterator it(data_->features, i); it; ++it)
    u += it.value() * (x(other + it.col()) - x(own + it.col()));
  return u;
}

double LogisticProblem::regularizer(const Vector& x) const {
  double r = 0;
  for (Index k = 0; k < x.size(); ++k) {
    const double t = x(k) * x(k);
    r += t / (1 + t);
  }
  return lambda_ * r;
}

void LogisticProblem::add_regularizer_gradient(const Vector& x, Eigen::Ref<Vector> out) const {
  if (lambda_ == 0) return;
  for (Index k = 0; k < x.size(); ++k) {
    const double q = 1 + x(k) * x(k);
    out(k) += 2 * lambda_ * x(k) / (q * q);
  }
}

double LogisticProblem::component_value(Index i, const Vector& x) const {
  return softplus(margin(i, x)) + regularizer(x);
}

void LogisticProblem::component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const {
  const Index d = data_->dim();
  const bool first = data_->labels[static_cast<std::size_t>(i)] == 1;
  const Index own = first ? 0 : d;
  const Index other = first ? d : 0;
  const double s = sigmoid(margin(i, x));
  out.setZero();
  for (SparseRows::InnerIterator it(data_->features, i); it; ++it) {
    out(other + it.col()) += s * it.value();
    out(own + it.col()) -= s * it.value();
  }
  add_regularizer_gradient(x, out);
}

double LogisticProblem::objective(const Vector& x) const {
  double loss = 0;
  for (Index i = 0; i < size(); ++i) loss += softplus(margin(i, x));
  return loss / double(size()) + regularizer(x);
}

void LogisticProblem::gradient(const Vector& x, Eigen::Ref<Vector> out) const {
  const Index d = data_->dim();
  out.setZero();
  const double inv_n = 1.0 / double(size());
  for (Index i = 0; i < size(); ++i) {
    const bool first = data_->labels[static_cast<std::size_t>(i)] == 1;
    const Index own = first ? 0 : d;
    const Index other = first ? d : 0;
    const double s = sigmoid(margin(i, x)) * inv_n;
    for (SparseRows::InnerIterator it(data_->features, i); it; ++it) {
      out(other + it.col()) += s * it.value();
      out(own + it.col()) -= s * it.value();
    }
  }
  add_regularizer_gradient(x, out);
}

SmoothnessReport LogisticProblem::smoothness() const {
  SmoothnessReport report;
  report.method = ConstantsMethod::UpperBound;
  report.L = (0.5 * row_norm_sq_).array() + 2 * lambda_;
  std::vector<Index> all(static_cast<std::size_t>(size()));
  std::iota(all.begin(), all.end(), Index(0));
  const std::vector<double> w(all.size(), 1.0 / double(size()));
  report.L_minus = weighted_lipschitz(all, w);
  return report;
}

double LogisticProblem::weighted_lipschitz(std::span<const Index> indices, std::span<const double> weights) const {
  if (indices.size() != weights.size()) throw DimensionMismatch("indices and weights differ in length");
  const Index d = data_->dim();
  Matrix gram = Matrix::Zero(d, d);
  double total = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double w = std::abs(weights[k]);
    total += w;
    for (SparseRows::InnerIterator a(data_->features, indices[k]); a; ++a)
      for (SparseRows::InnerIterator b(data_->features, indices[k]); b; ++b)
        gram(a.col(), b.col()) += w * a.value() * b.value();
  }
  // Softmax curvature is at most 1/4 along [a; -a], whose squared norm is 2|a|^2;
  // the penalty's second derivative lies in [-lambda/2, 2 lambda].
  return 0.5 * symmetric_max_eigenvalue(gram) + 2 * lambda_ * total;
}

std::shared_ptr<const LogisticProblem> logistic_problem(const SparseDataset& data, double lambda) {
  return std::make_shared<LogisticProblem>(std::make_shared<SparseDataset>(data), lambda);
}

GroupedProblem shard(const SparseDataset& data, Index clients, std::uint64_t seed, double lambda) {
  const Index n = data.rows();
  if (clients < 1 || clients > n)
    throw InvalidArgument("client count " + std::to_string(clients) + " outside [1, " + std::to_string(n) + "]");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index(0));
  Rng rng = make_rng(seed);
  for (Index k = n - 1; k > 0; --k) {
    const auto j = static_cast<Index>(uniform_index(rng, std::uint64_t(k + 1)));
    std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(j)]);
  }
  const Index base = n / clients, extra = n % clients;
  std::vector<std::vector<Index>> groups;
  Index pos = 0;
  for (Index c = 0; c < clients; ++c) {
    const Index m = base + (c < extra ? 1 : 0);
    groups.emplace_back(perm.begin() + pos, perm.begin() + pos + m);
    pos += m;
  }
  return GroupedProblem(logistic_problem(data, lambda), std::move(groups));
}

}  // namespace pagesamp
