#include "mvsde/measure.hpp"

#include <algorithm>
#include <cmath>

namespace mvsde {

EmpiricalMeasureView::EmpiricalMeasureView(std::span<const double> s, std::size_t n, std::size_t d,
                                           const double* mean)
    : states(s), particles(n), dim(d), cached_mean(mean) {
  if (n == 0 || d == 0) throw DimensionError("empirical measure needs N >= 1 and d >= 1");
  if (s.size() != n * d) throw DimensionError("state array size does not match N x d");
}

namespace {

constexpr std::size_t kLeafSize = 64;

struct Compensated {
  double sum = 0.0;
  double comp = 0.0;
};

// Exact error of a + b (Neumaier's branch form of TwoSum).
double add_error(double a, double b, double t) {
  return std::abs(a) >= std::abs(b) ? (a - t) + b : (b - t) + a;
}

// Neumaier summation on a leaf; the pairwise merge keeps both running
// compensations so cancellation across leaf boundaries is not lost.
Compensated leaf_sum(std::span<const double> v) {
  Compensated acc;
  for (double x : v) {
    const double t = acc.sum + x;
    acc.comp += add_error(acc.sum, x, t);
    acc.sum = t;
  }
  return acc;
}

Compensated pairwise(std::span<const double> v) {
  if (v.size() <= kLeafSize) return leaf_sum(v);
  const std::size_t half = v.size() / 2;
  const Compensated a = pairwise(v.first(half));
  const Compensated b = pairwise(v.subspan(half));
  const double t = a.sum + b.sum;
  return {t, a.comp + b.comp + add_error(a.sum, b.sum, t)};
}

void require_same_shape(const EmpiricalMeasureView& mu, const EmpiricalMeasureView& nu) {
  if (mu.particles != nu.particles || mu.dim != nu.dim) {
    throw DimensionError("ensembles differ in particle count or dimension");
  }
}

}  // namespace

double stable_sum(std::span<const double> values) {
  const Compensated total = pairwise(values);
  return total.sum + total.comp;
}

Vector mean_uncached(const EmpiricalMeasureView& mu) {
  Vector out(static_cast<Eigen::Index>(mu.dim));
  std::vector<double> column(mu.particles);
  for (std::size_t c = 0; c < mu.dim; ++c) {
    for (std::size_t i = 0; i < mu.particles; ++i) column[i] = mu.states[i * mu.dim + c];
    out[static_cast<Eigen::Index>(c)] = stable_sum(column) / static_cast<double>(mu.particles);
  }
  return out;
}

Vector mean(const EmpiricalMeasureView& mu) {
  if (mu.cached_mean != nullptr) {
    return ConstRowMap(mu.cached_mean, static_cast<Eigen::Index>(mu.dim));
  }
  return mean_uncached(mu);
}

double w2_sq_to_delta0(const EmpiricalMeasureView& mu) {
  std::vector<double> sq(mu.particles);
  for (std::size_t i = 0; i < mu.particles; ++i) sq[i] = mu.row(i).squaredNorm();
  return stable_sum(sq) / static_cast<double>(mu.particles);
}

double w2_sq_coupled(const EmpiricalMeasureView& mu, const EmpiricalMeasureView& nu) {
  require_same_shape(mu, nu);
  std::vector<double> sq(mu.particles);
  for (std::size_t i = 0; i < mu.particles; ++i) sq[i] = (mu.row(i) - nu.row(i)).squaredNorm();
  return stable_sum(sq) / static_cast<double>(mu.particles);
}

double w2_1d_exact(const EmpiricalMeasureView& mu, const EmpiricalMeasureView& nu) {
  if (mu.dim != 1 || nu.dim != 1) throw DimensionError("w2_1d_exact requires d = 1");
  std::vector<double> a(mu.states.begin(), mu.states.end());
  std::vector<double> b(nu.states.begin(), nu.states.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  std::vector<double> terms;
  if (a.size() == b.size()) {
    terms.resize(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) terms[j] = (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(stable_sum(terms) / static_cast<double>(a.size()));
  }

  // Merge the quantile breakpoints k/|a| and k/|b|; on each piece both
  // quantile functions are constant. Breakpoints are compared in integer
  // arithmetic: ia/na < ib/nb  <=>  ia*nb < ib*na.
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const double denom = static_cast<double>(na) * static_cast<double>(nb);
  std::size_t ia = 0, ib = 0;
  std::size_t prev = 0;  // in units of 1/(na*nb)
  while (ia < na && ib < nb) {
    const std::size_t next_a = (ia + 1) * nb;
    const std::size_t next_b = (ib + 1) * na;
    const std::size_t next = std::min(next_a, next_b);
    const double diff = a[ia] - b[ib];
    terms.push_back(diff * diff * static_cast<double>(next - prev) / denom);
    prev = next;
    if (next_a == next) ++ia;
    if (next_b == next) ++ib;
  }
  return std::sqrt(stable_sum(terms));
}

OwnedEnsemble OwnedEnsemble::from_rows(const std::vector<std::vector<double>>& rows) {
  OwnedEnsemble e;
  e.particles = rows.size();
  e.dim = rows.empty() ? 0 : rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != e.dim) throw DimensionError("ragged ensemble rows");
    e.data.insert(e.data.end(), r.begin(), r.end());
  }
  return e;
}

OwnedEnsemble OwnedEnsemble::scalar(const std::vector<double>& values) {
  return {values, values.size(), 1};
}

}  // namespace mvsde
