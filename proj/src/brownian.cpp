#include "mvsde/brownian.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace mvsde {

BrownianBundle::BrownianBundle(std::size_t particles, int m, int m0, std::size_t steps, double horizon,
                               std::vector<double> dw, std::vector<double> dw0, std::uint64_t seed,
                               std::uint32_t realization, int coarsenings)
    : particles_(particles),
      m_(m),
      m0_(m0),
      steps_(steps),
      horizon_(horizon),
      dw_(std::move(dw)),
      dw0_(std::move(dw0)),
      seed_(seed),
      realization_(realization),
      coarsenings_(coarsenings) {
  if (steps == 0) throw std::invalid_argument("Brownian bundle needs n >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("Brownian bundle needs T > 0");
  if (m < 0 || m0 < 0) throw std::invalid_argument("noise dimensions must be non-negative");
  if (dw_.size() != particles * steps * static_cast<std::size_t>(m)) {
    throw DimensionError("idiosyncratic increments do not match N x n x m");
  }
  if (dw0_.size() != steps * static_cast<std::size_t>(m0)) {
    throw DimensionError("common increments do not match n x m0");
  }
}

namespace {

std::uint32_t word3(std::uint32_t realization, StreamTag tag) {
  return (realization << 8) | static_cast<std::uint32_t>(tag);
}

void fill_row(double* out, int width, std::uint32_t index, std::uint32_t step, std::uint32_t w3,
              const PhiloxKey& key, double scale) {
  for (int c = 0; c < width; c += 2) {
    const auto [z0, z1] = normal_pair({index, step, static_cast<std::uint32_t>(c / 2), w3}, key);
    out[c] = scale * z0;
    if (c + 1 < width) out[c + 1] = scale * z1;
  }
}

}  // namespace

BrownianBundle generate(std::uint64_t master_seed, std::size_t particles, int m, int m0, std::size_t steps,
                        double horizon, std::uint32_t realization) {
  if (steps == 0) throw std::invalid_argument("generate: n must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("generate: T must be > 0");
  if (particles > std::numeric_limits<std::uint32_t>::max() || steps > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("generate: particle or step count exceeds the counter range");
  }
  if (realization >= (1u << 24)) throw std::invalid_argument("generate: realization index must be < 2^24");

  const PhiloxKey key = key_from_seed(master_seed);
  const double scale = std::sqrt(horizon / static_cast<double>(steps));
  const auto mw = static_cast<std::size_t>(m);
  std::vector<double> dw(particles * steps * mw);
  std::vector<double> dw0(steps * static_cast<std::size_t>(m0));

  const std::uint32_t w3_idio = word3(realization, StreamTag::Idiosyncratic);
  const auto n_particles = static_cast<std::int64_t>(particles);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_particles; ++i) {
    for (std::size_t k = 0; k < steps; ++k) {
      fill_row(dw.data() + (static_cast<std::size_t>(i) * steps + k) * mw, m, static_cast<std::uint32_t>(i),
               static_cast<std::uint32_t>(k), w3_idio, key, scale);
    }
  }
  const std::uint32_t w3_common = word3(realization, StreamTag::Common);
  for (std::size_t k = 0; k < steps; ++k) {
    fill_row(dw0.data() + k * static_cast<std::size_t>(m0), m0, 0u, static_cast<std::uint32_t>(k), w3_common, key,
             scale);
  }
  return {particles, m, m0, steps, horizon, std::move(dw), std::move(dw0), master_seed, realization, 0};
}

BrownianBundle coarsen(const BrownianBundle& fine) {
  if (fine.steps() % 2 != 0) throw std::invalid_argument("coarsen: step count must be even");
  const std::size_t coarse_steps = fine.steps() / 2;
  const auto m = static_cast<std::size_t>(fine.m());
  const auto m0 = static_cast<std::size_t>(fine.m0());
  std::vector<double> dw(fine.particles() * coarse_steps * m);
  std::vector<double> dw0(coarse_steps * m0);
  for (std::size_t i = 0; i < fine.particles(); ++i) {
    for (std::size_t k = 0; k < coarse_steps; ++k) {
      const auto a = fine.increment(i, 2 * k);
      const auto b = fine.increment(i, 2 * k + 1);
      for (std::size_t c = 0; c < m; ++c) dw[(i * coarse_steps + k) * m + c] = a[c] + b[c];
    }
  }
  for (std::size_t k = 0; k < coarse_steps; ++k) {
    const auto a = fine.common_increment(2 * k);
    const auto b = fine.common_increment(2 * k + 1);
    for (std::size_t c = 0; c < m0; ++c) dw0[k * m0 + c] = a[c] + b[c];
  }
  return {fine.particles(), fine.m(),   fine.m0(),          coarse_steps,         fine.horizon(), std::move(dw),
          std::move(dw0),   fine.seed(), fine.realization(), fine.coarsenings() + 1};
}

Matrix bridge_substeps(ConstVectorRef total, double h, int substeps, CounterStream& rng) {
  if (substeps < 2) throw ModeError("SubstepApprox needs at least 2 substeps");
  const Eigen::Index dim = total.size();
  const double scale = std::sqrt(h / substeps);
  Matrix path(substeps, dim);
  for (int s = 0; s < substeps; ++s) {
    for (Eigen::Index c = 0; c < dim; ++c) path(s, c) = scale * rng.normal();
  }
  // Subtracting the mean excess gives the exact conditional law of the
  // sub-increments given their sum.
  const Vector excess = (path.colwise().sum().transpose() - total) / substeps;
  path.rowwise() -= excess.transpose();
  return path;
}

Matrix discrete_double_sum(const Matrix& path_a, const Matrix& path_b) {
  if (path_a.rows() != path_b.rows()) throw DimensionError("sub-paths must share the substep grid");
  Matrix out = Matrix::Zero(path_a.cols(), path_b.cols());
  Vector running = Vector::Zero(path_a.cols());
  for (Eigen::Index s = 0; s < path_a.rows(); ++s) {
    out.noalias() += running * path_b.row(s);
    running += path_a.row(s).transpose();
  }
  return out;
}

Matrix double_integral(ConstVectorRef dwa, ConstVectorRef dwb, double h, bool same_driver,
                       const DoubleIntegralMode& mode, CounterStream* rng) {
  if (!(h > 0.0)) throw std::invalid_argument("double_integral: h must be > 0");
  if (same_driver && (dwa.size() != dwb.size() || dwa != dwb)) {
    throw ModeError("double_integral: same_driver requires identical increments");
  }
  if (mode.kind == DoubleIntegralMode::Kind::CommutativeClosedForm) {
    Matrix out = dwa * dwb.transpose();
    if (same_driver) out -= h * Matrix::Identity(dwa.size(), dwa.size());
    return 0.5 * out;
  }
  if (mode.substeps < 2) throw ModeError("SubstepApprox needs at least 2 substeps");
  if (rng == nullptr) throw ModeError("SubstepApprox needs a random stream for the bridge");
  const Matrix path_a = bridge_substeps(dwa, h, mode.substeps, *rng);
  if (same_driver) return discrete_double_sum(path_a, path_a);
  const Matrix path_b = bridge_substeps(dwb, h, mode.substeps, *rng);
  return discrete_double_sum(path_a, path_b);
}

}  // namespace mvsde
