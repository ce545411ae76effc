#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mvsde/model.hpp"
#include "mvsde/scheme.hpp"

namespace mvsde {

/// ((1/N) sum_i |x_fine,i - x_coarse,i|^p)^{1/p}.
double two_level_error(const ParticleEnsemble& fine, const ParticleEnsemble& coarse, int p);

/// Least-squares slope of y against x.
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

struct RateReport {
  std::vector<int> levels;         // l, with n = 2^l
  std::vector<int> p_values;
  std::vector<std::vector<double>> rmse;  // rmse[level index][p index]
  std::vector<double> slope;               // decay rate per p: -d log2(rmse) / dl

  std::size_t steps_at(std::size_t level_index) const { return std::size_t{1} << levels[level_index]; }
  /// Re-fits the slopes from the stored rmse values.
  std::vector<double> refit() const;
};

struct StudyConfig {
  SchemeConfig scheme;  // `steps` is ignored; the levels set the grids
  int level_min = 3;
  int level_max = 9;
  std::size_t particles = 1000;
  std::vector<int> p_values{2, 4, 6};
  std::size_t outer = 1;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Two-level self-convergence study. For each outer common-noise
/// realization one Brownian bundle is drawn on the finest grid 2^level_max
/// and coarsened down to 2^(level_min-1); all levels share the initial
/// states. Level l compares n = 2^l against n = 2^(l-1). The p-th powers
/// are averaged over particles and outer realizations before the root.
RateReport convergence_study(const ModelSpec& model, const StudyConfig& config);

struct ChaosPoint {
  std::size_t particles;
  double w2;
};

/// Terminal-law W2 between ensembles of each size in `sizes` and one
/// reference ensemble. The drivers are nested: particle i uses the same
/// initial draw and idiosyncratic noise in every ensemble, and the common
/// noise is shared. Errors are averaged over `repeats` independent noise
/// realizations.
std::vector<ChaosPoint> chaos_trend(const ModelSpec& model, const SchemeConfig& scheme,
                                    const std::vector<std::size_t>& sizes, std::size_t reference_particles,
                                    std::uint64_t seed, std::size_t repeats = 1);

struct MomentTrace {
  std::vector<int> p_values;
  std::vector<std::vector<double>> moments;  // moments[step][p index], step 0 is the initial state
  std::vector<double> max_over_steps;
  std::optional<BlowUpError> blow_up;
};

/// Per-step empirical moments (1/N) sum |x_i|^p. `noise_steps` (a multiple
/// of scheme.steps, 0 meaning scheme.steps) sets the grid the noise is drawn
/// on before coarsening, so runs at different n can share one Brownian path.
/// A blow-up truncates the table and is recorded rather than thrown.
MomentTrace moment_trace(const ModelSpec& model, const SchemeConfig& scheme, std::size_t particles,
                         const std::vector<int>& p_values, std::uint64_t seed, std::size_t noise_steps = 0);

double empirical_moment(const ParticleEnsemble& ensemble, int p);

}  // namespace mvsde
