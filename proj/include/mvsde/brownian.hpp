#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mvsde/measure.hpp"
#include "mvsde/philox.hpp"

namespace mvsde {

class ModeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// How the within-step iterated integrals int (W_a(s) - W_a(t)) dW_b(s) are
/// represented.
struct DoubleIntegralMode {
  enum class Kind { CommutativeClosedForm, SubstepApprox };
  Kind kind = Kind::CommutativeClosedForm;
  int substeps = 0;

  static DoubleIntegralMode commutative() { return {}; }
  static DoubleIntegralMode substep(int m) {
    if (m < 2) throw ModeError("SubstepApprox needs at least 2 substeps");
    return {Kind::SubstepApprox, m};
  }
};

/// Idiosyncratic increments dW (N x n x m, particle-major) and common
/// increments dW0 (n x m0) on a uniform grid of n steps over [0, T].
class BrownianBundle {
 public:
  BrownianBundle(std::size_t particles, int m, int m0, std::size_t steps, double horizon,
                 std::vector<double> dw, std::vector<double> dw0, std::uint64_t seed = 0,
                 std::uint32_t realization = 0, int coarsenings = 0);

  std::size_t particles() const { return particles_; }
  int m() const { return m_; }
  int m0() const { return m0_; }
  std::size_t steps() const { return steps_; }
  double horizon() const { return horizon_; }
  double step_size() const { return horizon_ / static_cast<double>(steps_); }
  std::uint64_t seed() const { return seed_; }
  std::uint32_t realization() const { return realization_; }
  int coarsenings() const { return coarsenings_; }

  std::span<const double> increment(std::size_t particle, std::size_t step) const {
    return {dw_.data() + (particle * steps_ + step) * static_cast<std::size_t>(m_), static_cast<std::size_t>(m_)};
  }
  std::span<const double> common_increment(std::size_t step) const {
    return {dw0_.data() + step * static_cast<std::size_t>(m0_), static_cast<std::size_t>(m0_)};
  }
  const std::vector<double>& idiosyncratic() const { return dw_; }
  const std::vector<double>& common() const { return dw0_; }

 private:
  std::size_t particles_;
  int m_;
  int m0_;
  std::size_t steps_;
  double horizon_;
  std::vector<double> dw_;
  std::vector<double> dw0_;
  std::uint64_t seed_;
  std::uint32_t realization_;
  int coarsenings_;
};

/// Increment (particle i, step k, component c) is a pure function of
/// (seed, realization, i, k, c); the fill is parallel and worker-count
/// independent.
BrownianBundle generate(std::uint64_t master_seed, std::size_t particles, int m, int m0, std::size_t steps,
                        double horizon, std::uint32_t realization = 0);

/// Halves the grid: coarse increment k = fine 2k + fine 2k+1.
BrownianBundle coarsen(const BrownianBundle& fine);

/// Iterated integral I[a][b] ~ int_t^{t+h} (W_a(s) - W_a(t)) dW_b(s).
///
/// CommutativeClosedForm: same driver -> (dW dW^T - h Id)/2; independent
/// drivers -> dWa dWb^T / 2 (Levy area dropped). SubstepApprox builds a
/// Brownian bridge through the given totals and sums the discrete double
/// sum; it needs `rng`.
Matrix double_integral(ConstVectorRef dwa, ConstVectorRef dwb, double h, bool same_driver,
                       const DoubleIntegralMode& mode, CounterStream* rng = nullptr);

/// M sub-increments (rows) of variance h/M each, conditioned to sum to
/// `total` componentwise.
Matrix bridge_substeps(ConstVectorRef total, double h, int substeps, CounterStream& rng);

/// sum_{r < s} path_a.row(r)^T path_b.row(s).
Matrix discrete_double_sum(const Matrix& path_a, const Matrix& path_b);

}  // namespace mvsde
