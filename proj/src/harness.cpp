#include "mvsde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace mvsde {

namespace {

void require_even_p(int p) {
  if (p <= 0 || p % 2 != 0) throw std::invalid_argument("p must be a positive even integer");
}

// |v|^p for even p from the squared norm, without a pow call.
double even_power(double norm_sq, int p) {
  double out = 1.0;
  for (int e = 0; e < p / 2; ++e) out *= norm_sq;
  return out;
}

double mean_pth_power_difference(const ParticleEnsemble& fine, const ParticleEnsemble& coarse, int p) {
  if (fine.particles != coarse.particles || fine.dim != coarse.dim) {
    throw DimensionError("two_level_error: ensembles differ in N or d");
  }
  std::vector<double> terms(fine.particles);
  for (std::size_t i = 0; i < fine.particles; ++i) {
    terms[i] = even_power((fine.row(i) - coarse.row(i)).squaredNorm(), p);
  }
  return stable_sum(terms) / static_cast<double>(fine.particles);
}

}  // namespace

double two_level_error(const ParticleEnsemble& fine, const ParticleEnsemble& coarse, int p) {
  require_even_p(p);
  return std::pow(mean_pth_power_difference(fine, coarse, p), 1.0 / p);
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs >= 2 paired points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

std::vector<double> RateReport::refit() const {
  std::vector<double> out;
  std::vector<double> xs(levels.begin(), levels.end());
  for (std::size_t pi = 0; pi < p_values.size(); ++pi) {
    std::vector<double> ys;
    for (const auto& row : rmse) ys.push_back(std::log2(row[pi]));
    out.push_back(-least_squares_slope(xs, ys));
  }
  return out;
}

void StudyConfig::validate() const {
  if (level_min < 1) throw std::invalid_argument("study: level_min must be >= 1");
  if (level_max < level_min) throw std::invalid_argument("study: level_max must be >= level_min");
  if (level_max > 30) throw std::invalid_argument("study: level_max must be <= 30");
  if (particles == 0) throw std::invalid_argument("study: particle count must be >= 1");
  if (outer == 0) throw std::invalid_argument("study: outer must be >= 1");
  if (p_values.empty()) throw std::invalid_argument("study: p_values must not be empty");
  for (int p : p_values) require_even_p(p);
  if (!(scheme.horizon > 0.0)) throw std::invalid_argument("study: T must be > 0");
}

RateReport convergence_study(const ModelSpec& model, const StudyConfig& config) {
  config.validate();
  const std::size_t n_levels = static_cast<std::size_t>(config.level_max - config.level_min + 1);
  const std::size_t n_p = config.p_values.size();
  std::vector<std::vector<double>> accum(n_levels, std::vector<double>(n_p, 0.0));

  for (std::size_t o = 0; o < config.outer; ++o) {
    const auto realization = static_cast<std::uint32_t>(o);
    BrownianBundle bundle = generate(config.seed, config.particles, model.m, model.m0,
                                     std::size_t{1} << config.level_max, config.scheme.horizon, realization);
    const ParticleEnsemble initial = sample_initial_states(model, config.particles, config.seed, realization);

    std::map<int, ParticleEnsemble> finals;
    for (int level = config.level_max; level >= config.level_min - 1; --level) {
      SchemeConfig scheme = config.scheme;
      scheme.steps = bundle.steps();
      try {
        finals[level] = simulate(model, scheme, bundle, initial).final_state;
      } catch (const BlowUpError& e) {
        throw e.with_context("level " + std::to_string(level) + ", outer " + std::to_string(o));
      }
      if (level > config.level_min - 1) bundle = coarsen(bundle);
    }
    for (std::size_t li = 0; li < n_levels; ++li) {
      const int level = config.level_min + static_cast<int>(li);
      for (std::size_t pi = 0; pi < n_p; ++pi) {
        accum[li][pi] += mean_pth_power_difference(finals[level], finals[level - 1], config.p_values[pi]);
      }
    }
  }

  RateReport report;
  report.p_values = config.p_values;
  for (std::size_t li = 0; li < n_levels; ++li) {
    report.levels.push_back(config.level_min + static_cast<int>(li));
    std::vector<double> row;
    for (std::size_t pi = 0; pi < n_p; ++pi) {
      const double mean_power = accum[li][pi] / static_cast<double>(config.outer);
      row.push_back(std::pow(mean_power, 1.0 / config.p_values[pi]));
    }
    report.rmse.push_back(std::move(row));
  }
  if (n_levels >= 2) {
    report.slope = report.refit();
  } else {
    report.slope.assign(n_p, std::nan(""));
  }
  return report;
}

std::vector<ChaosPoint> chaos_trend(const ModelSpec& model, const SchemeConfig& scheme,
                                    const std::vector<std::size_t>& sizes, std::size_t reference_particles,
                                    std::uint64_t seed, std::size_t repeats) {
  scheme.validate();
  if (model.d != 1) throw DimensionError("chaos_trend uses the exact 1-d W2 and needs d = 1");
  if (repeats == 0) throw std::invalid_argument("chaos_trend: repeats must be >= 1");
  for (std::size_t n : sizes) {
    if (n == 0 || n > reference_particles) {
      throw std::invalid_argument("chaos_trend: ensemble sizes must lie in [1, reference_N]");
    }
  }

  std::vector<double> totals(sizes.size(), 0.0);
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto realization = static_cast<std::uint32_t>(r);
    const BrownianBundle bundle = generate(seed, reference_particles, model.m, model.m0, scheme.steps,
                                           scheme.horizon, realization);
    const ParticleEnsemble reference_init = sample_initial_states(model, reference_particles, seed, realization);
    const ParticleEnsemble reference = simulate(model, scheme, bundle, reference_init).final_state;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
      const std::size_t n = sizes[si];
      std::vector<double> head(reference_init.states.begin(),
                               reference_init.states.begin() + static_cast<std::ptrdiff_t>(n));
      const ParticleEnsemble small = simulate(model, scheme, bundle, ParticleEnsemble(n, 1, std::move(head))).final_state;
      totals[si] += w2_1d_exact(small.view(), reference.view());
    }
  }

  std::vector<ChaosPoint> out;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    out.push_back({sizes[si], totals[si] / static_cast<double>(repeats)});
  }
  return out;
}

double empirical_moment(const ParticleEnsemble& ensemble, int p) {
  std::vector<double> terms(ensemble.particles);
  for (std::size_t i = 0; i < ensemble.particles; ++i) {
    const double norm = ensemble.row(i).norm();
    terms[i] = (p % 2 == 0) ? even_power(norm * norm, p) : std::pow(norm, p);
  }
  return stable_sum(terms) / static_cast<double>(ensemble.particles);
}

MomentTrace moment_trace(const ModelSpec& model, const SchemeConfig& scheme, std::size_t particles,
                         const std::vector<int>& p_values, std::uint64_t seed, std::size_t noise_steps) {
  scheme.validate();
  if (particles == 0) throw std::invalid_argument("moment_trace: particle count must be >= 1");
  for (int p : p_values) {
    if (p <= 0) throw std::invalid_argument("moment_trace: p must be positive");
  }
  if (noise_steps == 0) noise_steps = scheme.steps;
  if (noise_steps % scheme.steps != 0) throw std::invalid_argument("moment_trace: noise grid must refine n");
  std::size_t ratio = noise_steps / scheme.steps;
  if ((ratio & (ratio - 1)) != 0) throw std::invalid_argument("moment_trace: noise grid must be n times 2^k");

  BrownianBundle bundle = generate(seed, particles, model.m, model.m0, noise_steps, scheme.horizon);
  while (bundle.steps() > scheme.steps) bundle = coarsen(bundle);

  MomentTrace trace;
  trace.p_values = p_values;
  trace.max_over_steps.assign(p_values.size(), 0.0);
  auto record = [&](const ParticleEnsemble& ens) {
    std::vector<double> row;
    for (std::size_t pi = 0; pi < p_values.size(); ++pi) {
      row.push_back(empirical_moment(ens, p_values[pi]));
      trace.max_over_steps[pi] = std::max(trace.max_over_steps[pi], row.back());
    }
    trace.moments.push_back(std::move(row));
  };

  try {
    simulate(model, scheme, bundle, sample_initial_states(model, particles, seed), false, record);
  } catch (const BlowUpError& e) {
    trace.blow_up = e;
  }
  return trace;
}

}  // namespace mvsde
