#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mvsde/config.hpp"
#include "mvsde/harness.hpp"

namespace mvsde {

namespace {

StudyConfig study_from(const RunConfig& c) {
  StudyConfig s;
  s.scheme = c.scheme;
  s.level_min = c.level_min;
  s.level_max = c.level_max;
  s.particles = c.particles;
  s.p_values = c.p_values;
  s.outer = c.outer;
  s.seed = c.seed;
  return s;
}

void run_study(const ModelSpec& model, const RunConfig& c, std::ostream& csv, std::ostream& summary) {
  const RateReport report = convergence_study(model, study_from(c));
  csv << "level,n,p,rmse\n";
  for (std::size_t li = 0; li < report.levels.size(); ++li) {
    for (std::size_t pi = 0; pi < report.p_values.size(); ++pi) {
      csv << report.levels[li] << ',' << report.steps_at(li) << ',' << report.p_values[pi] << ','
          << format_double(report.rmse[li][pi]) << '\n';
    }
  }
  for (std::size_t pi = 0; pi < report.p_values.size(); ++pi) {
    summary << "slope p=" << report.p_values[pi] << ": " << format_double(report.slope[pi]) << '\n';
  }
}

int run_moments(const ModelSpec& model, const RunConfig& c, std::ostream& csv, std::ostream& summary) {
  const MomentTrace trace = moment_trace(model, c.scheme, c.particles, c.p_values, c.seed, c.noise_steps);
  csv << "step,p,moment\n";
  for (std::size_t k = 0; k < trace.moments.size(); ++k) {
    for (std::size_t pi = 0; pi < trace.p_values.size(); ++pi) {
      csv << k << ',' << trace.p_values[pi] << ',' << format_double(trace.moments[k][pi]) << '\n';
    }
  }
  if (trace.blow_up) {
    summary << "blow-up: " << trace.blow_up->what() << '\n';
    return kExitBlowUp;
  }
  for (std::size_t pi = 0; pi < trace.p_values.size(); ++pi) {
    summary << "max moment p=" << trace.p_values[pi] << ": " << format_double(trace.max_over_steps[pi]) << '\n';
  }
  return kExitOk;
}

void run_chaos(const ModelSpec& model, const RunConfig& c, std::ostream& csv) {
  const auto points = chaos_trend(model, c.scheme, c.sizes, c.reference_particles, c.seed, c.repeats);
  csv << "N,w2\n";
  for (const auto& pt : points) csv << pt.particles << ',' << format_double(pt.w2) << '\n';
}

void run_simulate(const ModelSpec& model, const RunConfig& c, std::ostream& csv) {
  const BrownianBundle bundle = generate(c.seed, c.particles, model.m, model.m0, c.scheme.steps, c.scheme.horizon);
  const auto result = simulate(model, c.scheme, bundle, sample_initial_states(model, c.particles, c.seed));
  const ParticleEnsemble& x = result.final_state;
  csv << "particle,component,value\n";
  for (std::size_t i = 0; i < x.particles; ++i) {
    for (std::size_t u = 0; u < x.dim; ++u) csv << i << ',' << u << ',' << format_double(x.row(i)(u)) << '\n';
  }
}

void run_audit(const ModelSpec& model, const RunConfig& c, std::ostream& csv, std::ostream& summary) {
  AuditOptions options;
  options.seed = c.seed;
  const AuditReport r = audit_assumptions(model, c.samples, c.radius, options);
  csv << "assumption,max_ratio,violated\n";
  csv << "coercivity," << format_double(r.coercivity) << ',' << r.coercivity_violated << '\n';
  csv << "monotonicity," << format_double(r.monotonicity) << ',' << r.monotonicity_violated << '\n';
  csv << "polynomial_lipschitz," << format_double(r.polynomial_lipschitz) << ','
      << r.polynomial_lipschitz_violated << '\n';
  if (r.non_finite > 0) summary << "non-finite coefficient values: " << r.non_finite << '\n';
}

}  // namespace

void set_worker_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int run(const RunConfig& config, std::ostream& csv, std::ostream& summary) {
  set_worker_threads(config.threads);
  try {
    const ModelSpec model = config.build_model();
    switch (config.command) {
      case Command::Study: run_study(model, config, csv, summary); break;
      case Command::Moments: return run_moments(model, config, csv, summary);
      case Command::Chaos: run_chaos(model, config, csv); break;
      case Command::Simulate: run_simulate(model, config, csv); break;
      case Command::Audit: run_audit(model, config, csv, summary); break;
    }
  } catch (const BlowUpError& e) {
    summary << "blow-up: " << e.what() << '\n';
    return kExitBlowUp;
  } catch (const ConfigError& e) {
    summary << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    summary << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

int run(const RunConfig& config) {
  if (config.output.empty()) return run(config, std::cout, std::cerr);
  std::ofstream out(config.output, std::ios::binary);
  if (!out) {
    std::cerr << "config error: output: cannot open '" << config.output << "'\n";
    return kExitConfig;
  }
  return run(config, out, std::cout);
}

}  // namespace mvsde
