#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/brownian.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"
#include "mvsde/taming.hpp"

namespace mvsde {

enum class SchemeKind { TamedEuler, TamedMilstein, UntamedEuler };

TamingKind taming_for(SchemeKind kind);

struct SchemeConfig {
  SchemeKind kind = SchemeKind::TamedEuler;
  std::size_t steps = 256;
  double horizon = 1.0;
  DoubleIntegralMode di_mode = DoubleIntegralMode::commutative();
  // Lions-derivative (measure) corrections of the Milstein scheme.
  bool measure_corrections = true;

  void validate() const;
};

/// N particle states in R^d at grid index `time_index`, row-major.
struct ParticleEnsemble {
  std::size_t particles = 0;
  std::size_t dim = 0;
  std::vector<double> states;
  std::size_t time_index = 0;

  ParticleEnsemble() = default;
  ParticleEnsemble(std::size_t n, std::size_t d, std::vector<double> s, std::size_t k = 0);
  static ParticleEnsemble from_rows(const std::vector<std::vector<double>>& rows);

  EmpiricalMeasureView view() const { return {states, particles, dim}; }
  ConstRowMap row(std::size_t i) const {
    return ConstRowMap(states.data() + i * dim, static_cast<Eigen::Index>(dim));
  }
};

/// Raised when a step produces a non-finite state.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(std::size_t step, std::size_t particle, std::string context = {});

  std::size_t step() const { return step_; }
  std::size_t particle() const { return particle_; }
  const std::string& context() const { return context_; }

  BlowUpError with_context(const std::string& extra) const;

 private:
  std::size_t step_;
  std::size_t particle_;
  std::string context_;
};

/// X_0^i drawn from the model's initial sampler, keyed by (seed, realization,
/// particle) so that nested ensembles share their leading particles.
ParticleEnsemble sample_initial_states(const ModelSpec& model, std::size_t particles, std::uint64_t seed,
                                       std::uint32_t realization = 0);

/// One explicit Euler step with every coefficient evaluated at the step-start
/// state and empirical measure (simultaneous update):
///   x_i <- x_i + b* h + sigma* dW^i_k + sigma0* dW0_k,
/// where * denotes division by the per-particle taming denominator.
/// The bundle may carry more particles than the ensemble; the leading rows
/// are used.
ParticleEnsemble euler_step(const ModelSpec& model, const ParticleEnsemble& ensemble, const BrownianBundle& bundle,
                            std::size_t k, TamingKind taming);

/// One tamed Milstein step: the Euler update with MilsteinFull taming plus
/// the iterated-integral corrections built from d_x sigma, d_x sigma0 and,
/// when config.measure_corrections is set, the Lions derivatives d_mu sigma,
/// d_mu sigma0 averaged over all particles j.
ParticleEnsemble milstein_step(const ModelSpec& model, const ParticleEnsemble& ensemble,
                               const BrownianBundle& bundle, std::size_t k, const SchemeConfig& config);

/// The Lions-derivative part of one tamed Milstein step, N x d row-major:
/// (1/N) sum_j d_mu sigma(x_i, mu, x_j) (sigma^n(x_j) I(W^j,W^i) + sigma0^n(x_j) I(W0,W^i))
/// plus the sigma0 analogue. milstein_step adds it last, so toggling
/// measure_corrections changes each state by exactly this amount up to the
/// rounding of that final addition.
std::vector<double> measure_correction(const ModelSpec& model, const ParticleEnsemble& ensemble,
                                       const BrownianBundle& bundle, std::size_t k, const SchemeConfig& config);

struct SimulationResult {
  ParticleEnsemble final_state;
  std::vector<ParticleEnsemble> trajectory;  // includes the initial state when kept
};

using StepObserver = std::function<void(const ParticleEnsemble&)>;

/// Applies config.steps steps of the configured scheme. The observer, if
/// given, sees the initial ensemble and every accepted step.
SimulationResult simulate(const ModelSpec& model, const SchemeConfig& config, const BrownianBundle& bundle,
                          ParticleEnsemble initial, bool keep_trajectory = false,
                          const StepObserver& observer = {});

}  // namespace mvsde
