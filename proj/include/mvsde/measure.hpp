#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace mvsde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstVectorRef = Eigen::Ref<const Eigen::VectorXd>;
using VectorRef = Eigen::Ref<Eigen::VectorXd>;
using MatrixRef = Eigen::Ref<Eigen::MatrixXd>;
using ConstRowMap = Eigen::Map<const Eigen::VectorXd>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Read-only view of an N x d particle array stored row-major, one row per
/// particle. The empirical measure (1/N) sum delta_{x_i} is carried by the
/// rows themselves; `mean` may point at a precomputed first moment so that
/// coefficient evaluations inside a step do not re-reduce the ensemble.
struct EmpiricalMeasureView {
  std::span<const double> states;
  std::size_t particles = 0;
  std::size_t dim = 0;
  const double* cached_mean = nullptr;

  EmpiricalMeasureView() = default;
  EmpiricalMeasureView(std::span<const double> s, std::size_t n, std::size_t d,
                       const double* mean = nullptr);

  ConstRowMap row(std::size_t i) const {
    return ConstRowMap(states.data() + i * dim, static_cast<Eigen::Index>(dim));
  }
};

/// Order-fixed compensated pairwise sum; the result does not depend on how
/// the caller is parallelised.
double stable_sum(std::span<const double> values);

Vector mean(const EmpiricalMeasureView& mu);
/// Recomputes the mean even when a cached value is attached.
Vector mean_uncached(const EmpiricalMeasureView& mu);

/// W_2^2(mu, delta_0) = (1/N) sum |x_j|^2.
double w2_sq_to_delta0(const EmpiricalMeasureView& mu);

/// (1/N) sum |x_j - y_j|^2, the identity-coupling upper bound on W_2^2.
double w2_sq_coupled(const EmpiricalMeasureView& mu, const EmpiricalMeasureView& nu);

/// Exact W_2 between two one-dimensional empirical measures. Equal sizes
/// pair order statistics; unequal sizes integrate the quantile difference.
double w2_1d_exact(const EmpiricalMeasureView& mu, const EmpiricalMeasureView& nu);

/// Convenience owner for small ensembles built in tests and tools.
struct OwnedEnsemble {
  std::vector<double> data;
  std::size_t particles = 0;
  std::size_t dim = 0;

  static OwnedEnsemble from_rows(const std::vector<std::vector<double>>& rows);
  static OwnedEnsemble scalar(const std::vector<double>& values);
  EmpiricalMeasureView view() const { return {data, particles, dim}; }
};

}  // namespace mvsde
