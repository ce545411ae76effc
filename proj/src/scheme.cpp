#include "mvsde/scheme.hpp"

#include <cmath>
#include <utility>

namespace mvsde {

TamingKind taming_for(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::TamedEuler:
      return TamingKind::EulerHalf;
    case SchemeKind::TamedMilstein:
      return TamingKind::MilsteinFull;
    case SchemeKind::UntamedEuler:
      break;
  }
  return TamingKind::None;
}

void SchemeConfig::validate() const {
  if (steps == 0) throw std::invalid_argument("scheme: n must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("scheme: T must be > 0");
  if (di_mode.kind == DoubleIntegralMode::Kind::SubstepApprox && di_mode.substeps < 2) {
    throw ModeError("scheme: SubstepApprox needs at least 2 substeps");
  }
}

ParticleEnsemble::ParticleEnsemble(std::size_t n, std::size_t d, std::vector<double> s, std::size_t k)
    : particles(n), dim(d), states(std::move(s)), time_index(k) {
  if (n == 0 || d == 0) throw DimensionError("ensemble needs N >= 1 and d >= 1");
  if (states.size() != n * d) throw DimensionError("ensemble state array does not match N x d");
}

ParticleEnsemble ParticleEnsemble::from_rows(const std::vector<std::vector<double>>& rows) {
  const OwnedEnsemble e = OwnedEnsemble::from_rows(rows);
  return {e.particles, e.dim, e.data};
}

BlowUpError::BlowUpError(std::size_t step, std::size_t particle, std::string context)
    : std::runtime_error("non-finite state at step " + std::to_string(step) + ", particle " +
                         std::to_string(particle) + (context.empty() ? "" : " (" + context + ")")),
      step_(step),
      particle_(particle),
      context_(std::move(context)) {}

BlowUpError BlowUpError::with_context(const std::string& extra) const {
  return {step_, particle_, context_.empty() ? extra : context_ + ", " + extra};
}

ParticleEnsemble sample_initial_states(const ModelSpec& model, std::size_t particles, std::uint64_t seed,
                                       std::uint32_t realization) {
  if (!model.initial_sampler) throw std::invalid_argument("model has no initial sampler");
  const auto d = static_cast<std::size_t>(model.d);
  std::vector<double> states(particles * d);
  for (std::size_t i = 0; i < particles; ++i) {
    CounterStream rng(seed, realization, StreamTag::InitialState, static_cast<std::uint32_t>(i));
    const Vector x = model.initial_sampler(rng);
    if (static_cast<std::size_t>(x.size()) != d) throw DimensionError("initial sampler returned wrong dimension");
    std::copy(x.data(), x.data() + d, states.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return {particles, d, std::move(states)};
}

namespace {

void check_shapes(const ModelSpec& model, const ParticleEnsemble& ensemble, const BrownianBundle& bundle,
                  std::size_t k) {
  if (ensemble.dim != static_cast<std::size_t>(model.d)) throw DimensionError("ensemble dimension != model d");
  if (bundle.m() != model.m || bundle.m0() != model.m0) {
    throw DimensionError("bundle noise dimensions do not match the model");
  }
  if (bundle.particles() < ensemble.particles) throw DimensionError("bundle has fewer particles than the ensemble");
  if (k >= bundle.steps()) throw std::out_of_range("step index beyond the bundle grid");
}

// Step-start quantities shared by every particle update of one step.
struct StepWorkspace {
  std::vector<double> mean;
  std::vector<double> denom;
  std::vector<double> drift;  // N x d, tamed
  std::vector<double> sig;    // N x (d*m), column-major blocks, tamed
  std::vector<double> sig0;   // N x (d*m0), column-major blocks, tamed
  std::vector<Matrix> paths;  // per-particle bridge sub-increments (SubstepApprox)
  Matrix common_path;
  std::vector<double> next;
};

struct StepContext {
  const ModelSpec& model;
  const ParticleEnsemble& ensemble;
  const BrownianBundle& bundle;
  std::size_t k;
  TamingKind taming;
  bool milstein;
  const SchemeConfig* config;
};

void evaluate_tamed_coefficients(const StepContext& ctx, StepWorkspace& ws) {
  const auto& model = ctx.model;
  const auto& ens = ctx.ensemble;
  const std::size_t n_particles = ens.particles;
  const Eigen::Index d = model.d;
  const auto dm = static_cast<std::size_t>(model.d * model.m);
  const auto dm0 = static_cast<std::size_t>(model.d * model.m0);

  const Vector mu_mean = mean_uncached(ens.view());
  ws.mean.assign(mu_mean.data(), mu_mean.data() + d);
  ws.denom.resize(n_particles);
  ws.drift.assign(n_particles * static_cast<std::size_t>(d), 0.0);
  ws.sig.assign(n_particles * dm, 0.0);
  ws.sig0.assign(n_particles * dm0, 0.0);

  const EmpiricalMeasureView mu(ens.states, n_particles, ens.dim, ws.mean.data());
  const double t = static_cast<double>(ctx.k) * ctx.bundle.step_size();
  const std::size_t n_steps = ctx.bundle.steps();
  const auto count = static_cast<std::int64_t>(n_particles);

#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const ConstRowMap x = ens.row(i);
    const double denom = taming_denominator(x, model.rho, n_steps, ctx.taming);
    ws.denom[i] = denom;
    Eigen::Map<Vector> b(ws.drift.data() + i * static_cast<std::size_t>(d), d);
    if (model.drift) model.drift(t, x, mu, b);
    b /= denom;
    if (dm > 0 && model.diffusion) {
      Eigen::Map<Matrix> s(ws.sig.data() + i * dm, d, model.m);
      model.diffusion(t, x, mu, s);
      s /= denom;
    }
    if (dm0 > 0 && model.common_diffusion) {
      Eigen::Map<Matrix> s0(ws.sig0.data() + i * dm0, d, model.m0);
      model.common_diffusion(t, x, mu, s0);
      s0 /= denom;
    }
  }
}

void build_bridge_paths(const StepContext& ctx, StepWorkspace& ws) {
  const auto& bundle = ctx.bundle;
  const int substeps = ctx.config->di_mode.substeps;
  const double h = bundle.step_size();
  const auto k32 = static_cast<std::uint32_t>(ctx.k);
  ws.paths.resize(ctx.ensemble.particles);
  const auto count = static_cast<std::int64_t>(ctx.ensemble.particles);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto inc = bundle.increment(i, ctx.k);
    CounterStream rng(bundle.seed(), bundle.realization(), StreamTag::BridgeIdiosyncratic,
                      static_cast<std::uint32_t>(i), k32);
    ws.paths[i] = bridge_substeps(Eigen::Map<const Vector>(inc.data(), bundle.m()), h, substeps, rng);
  }
  const auto common = bundle.common_increment(ctx.k);
  CounterStream rng(bundle.seed(), bundle.realization(), StreamTag::BridgeCommon, 0u, k32);
  ws.common_path = bridge_substeps(Eigen::Map<const Vector>(common.data(), bundle.m0()), h, substeps, rng);
}

// Iterated-integral matrices for one outer particle i, all sharing the same
// representation (closed form or bridge sums).
struct IntegralSet {
  Matrix ii, zero_i, i_zero, zero_zero;  // (W^i,W^i) (W0,W^i) (W^i,W0) (W0,W0)
};

IntegralSet integrals_for(const StepContext& ctx, const StepWorkspace& ws, std::size_t i) {
  const auto& bundle = ctx.bundle;
  const double h = bundle.step_size();
  IntegralSet set;
  if (ctx.config->di_mode.kind == DoubleIntegralMode::Kind::CommutativeClosedForm) {
    const auto inc = bundle.increment(i, ctx.k);
    const auto common = bundle.common_increment(ctx.k);
    const Eigen::Map<const Vector> dw(inc.data(), bundle.m());
    const Eigen::Map<const Vector> dw0(common.data(), bundle.m0());
    set.ii = 0.5 * (dw * dw.transpose() - h * Matrix::Identity(bundle.m(), bundle.m()));
    set.zero_i = 0.5 * dw0 * dw.transpose();
    set.i_zero = 0.5 * dw * dw0.transpose();
    set.zero_zero = 0.5 * (dw0 * dw0.transpose() - h * Matrix::Identity(bundle.m0(), bundle.m0()));
  } else {
    set.ii = discrete_double_sum(ws.paths[i], ws.paths[i]);
    set.zero_i = discrete_double_sum(ws.common_path, ws.paths[i]);
    set.i_zero = discrete_double_sum(ws.paths[i], ws.common_path);
    set.zero_zero = discrete_double_sum(ws.common_path, ws.common_path);
  }
  return set;
}

// (W^j, W^i) and (W^j, W0) integrals for a cross-particle pair j != i.
std::pair<Matrix, Matrix> cross_integrals(const StepContext& ctx, const StepWorkspace& ws, std::size_t j,
                                          std::size_t i) {
  const auto& bundle = ctx.bundle;
  if (ctx.config->di_mode.kind == DoubleIntegralMode::Kind::CommutativeClosedForm) {
    const auto inc_j = bundle.increment(j, ctx.k);
    const auto inc_i = bundle.increment(i, ctx.k);
    const auto common = bundle.common_increment(ctx.k);
    const Eigen::Map<const Vector> dwj(inc_j.data(), bundle.m());
    const Eigen::Map<const Vector> dwi(inc_i.data(), bundle.m());
    const Eigen::Map<const Vector> dw0(common.data(), bundle.m0());
    return {0.5 * dwj * dwi.transpose(), 0.5 * dwj * dw0.transpose()};
  }
  return {discrete_double_sum(ws.paths[j], ws.paths[i]), discrete_double_sum(ws.paths[j], ws.common_path)};
}

// The two parts of the Milstein increment: d_x terms and the Lions-derivative
// terms averaged over the ensemble.
struct Correction {
  Vector state;
  Vector measure;
};

Correction milstein_correction(const StepContext& ctx, const StepWorkspace& ws, std::size_t i) {
  const auto& model = ctx.model;
  const auto& ens = ctx.ensemble;
  const Eigen::Index d = model.d;
  const auto dm = static_cast<std::size_t>(model.d * model.m);
  const auto dm0 = static_cast<std::size_t>(model.d * model.m0);
  const double t = static_cast<double>(ctx.k) * ctx.bundle.step_size();
  const EmpiricalMeasureView mu(ens.states, ens.particles, ens.dim, ws.mean.data());
  const ConstRowMap x = ens.row(i);

  auto tamed_sig = [&](std::size_t j) {
    return Eigen::Map<const Matrix>(ws.sig.data() + j * dm, d, model.m);
  };
  auto tamed_sig0 = [&](std::size_t j) {
    return Eigen::Map<const Matrix>(ws.sig0.data() + j * dm0, d, model.m0);
  };

  const IntegralSet in = integrals_for(ctx, ws, i);
  // Column v of `outer_w` is sum_q sigma^n[:,q] I[q][v] over both inner
  // drivers, paired with the outer driver W^i; `outer_w0` likewise for W0.
  const Matrix outer_w = tamed_sig(i) * in.ii + tamed_sig0(i) * in.zero_i;
  const Matrix outer_w0 = tamed_sig(i) * in.i_zero + tamed_sig0(i) * in.zero_zero;

  Vector corr = Vector::Zero(d);
  Vector grad(d);
  for (int u = 0; u < d; ++u) {
    if (model.diffusion_dx) {
      for (int v = 0; v < model.m; ++v) {
        model.diffusion_dx(t, x, mu, u, v, grad);
        corr[u] += grad.dot(outer_w.col(v));
      }
    }
    if (model.common_diffusion_dx) {
      for (int v = 0; v < model.m0; ++v) {
        model.common_diffusion_dx(t, x, mu, u, v, grad);
        corr[u] += grad.dot(outer_w0.col(v));
      }
    }
  }

  Vector bar = Vector::Zero(d);
  const bool has_dmu = model.diffusion_dmu || model.common_diffusion_dmu;
  if (!ctx.config->measure_corrections || !has_dmu) return {corr, bar};

  const double inv_n = 1.0 / static_cast<double>(ens.particles);
  for (std::size_t j = 0; j < ens.particles; ++j) {
    Matrix bar_w, bar_w0;
    if (j == i) {
      bar_w = outer_w;
      bar_w0 = outer_w0;
    } else {
      const auto [jw, jw0] = cross_integrals(ctx, ws, j, i);
      bar_w = tamed_sig(j) * jw + tamed_sig0(j) * in.zero_i;
      bar_w0 = tamed_sig(j) * jw0 + tamed_sig0(j) * in.zero_zero;
    }
    const ConstRowMap y = ens.row(j);
    for (int u = 0; u < d; ++u) {
      if (model.diffusion_dmu) {
        for (int v = 0; v < model.m; ++v) {
          model.diffusion_dmu(t, x, mu, y, u, v, grad);
          bar[u] += inv_n * grad.dot(bar_w.col(v));
        }
      }
      if (model.common_diffusion_dmu) {
        for (int v = 0; v < model.m0; ++v) {
          model.common_diffusion_dmu(t, x, mu, y, u, v, grad);
          bar[u] += inv_n * grad.dot(bar_w0.col(v));
        }
      }
    }
  }
  return {corr, bar};
}

ParticleEnsemble advance(const StepContext& ctx, StepWorkspace& ws) {
  const auto& model = ctx.model;
  const auto& ens = ctx.ensemble;
  const auto& bundle = ctx.bundle;
  check_shapes(model, ens, bundle, ctx.k);

  evaluate_tamed_coefficients(ctx, ws);
  const bool milstein = ctx.milstein && (model.diffusion_dx || model.common_diffusion_dx ||
                                         (ctx.config->measure_corrections &&
                                          (model.diffusion_dmu || model.common_diffusion_dmu)));
  if (milstein && ctx.config->di_mode.kind == DoubleIntegralMode::Kind::SubstepApprox) {
    build_bridge_paths(ctx, ws);
  }

  const auto d = static_cast<std::size_t>(model.d);
  const auto m = static_cast<std::size_t>(model.m);
  const auto m0 = static_cast<std::size_t>(model.m0);
  const double h = bundle.step_size();
  const auto common = bundle.common_increment(ctx.k);
  ws.next.resize(ens.states.size());
  const auto count = static_cast<std::int64_t>(ens.particles);

#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto dw = bundle.increment(i, ctx.k);
    const double* b = ws.drift.data() + i * d;
    const double* s = ws.sig.data() + i * d * m;
    const double* s0 = ws.sig0.data() + i * d * m0;
    Correction corr;
    if (milstein) corr = milstein_correction(ctx, ws, i);
    for (std::size_t u = 0; u < d; ++u) {
      double incr = b[u] * h;
      for (std::size_t q = 0; q < m; ++q) incr += s[q * d + u] * dw[q];
      for (std::size_t q = 0; q < m0; ++q) incr += s0[q * d + u] * common[q];
      if (milstein) {
        const auto uu = static_cast<Eigen::Index>(u);
        incr += corr.state[uu];
        incr += corr.measure[uu];
      }
      ws.next[i * d + u] = ens.states[i * d + u] + incr;
    }
  }

  for (std::size_t i = 0; i < ens.particles; ++i) {
    for (std::size_t u = 0; u < d; ++u) {
      if (!std::isfinite(ws.next[i * d + u])) throw BlowUpError(ctx.k, i);
    }
  }
  return {ens.particles, d, ws.next, ens.time_index + 1};
}

}  // namespace

ParticleEnsemble euler_step(const ModelSpec& model, const ParticleEnsemble& ensemble, const BrownianBundle& bundle,
                            std::size_t k, TamingKind taming) {
  const SchemeConfig config;
  StepWorkspace ws;
  return advance({model, ensemble, bundle, k, taming, false, &config}, ws);
}

ParticleEnsemble milstein_step(const ModelSpec& model, const ParticleEnsemble& ensemble,
                               const BrownianBundle& bundle, std::size_t k, const SchemeConfig& config) {
  config.validate();
  StepWorkspace ws;
  return advance({model, ensemble, bundle, k, TamingKind::MilsteinFull, true, &config}, ws);
}

std::vector<double> measure_correction(const ModelSpec& model, const ParticleEnsemble& ensemble,
                                       const BrownianBundle& bundle, std::size_t k, const SchemeConfig& config) {
  config.validate();
  check_shapes(model, ensemble, bundle, k);
  const StepContext ctx{model, ensemble, bundle, k, TamingKind::MilsteinFull, true, &config};
  StepWorkspace ws;
  evaluate_tamed_coefficients(ctx, ws);
  if (config.di_mode.kind == DoubleIntegralMode::Kind::SubstepApprox) build_bridge_paths(ctx, ws);
  std::vector<double> out(ensemble.states.size(), 0.0);
  for (std::size_t i = 0; i < ensemble.particles; ++i) {
    const Vector bar = milstein_correction(ctx, ws, i).measure;
    std::copy(bar.data(), bar.data() + bar.size(), out.begin() + static_cast<std::ptrdiff_t>(i * ensemble.dim));
  }
  return out;
}

SimulationResult simulate(const ModelSpec& model, const SchemeConfig& config, const BrownianBundle& bundle,
                          ParticleEnsemble initial, bool keep_trajectory, const StepObserver& observer) {
  config.validate();
  if (bundle.steps() != config.steps) throw DimensionError("bundle step count differs from the scheme's n");
  if (std::abs(bundle.horizon() - config.horizon) > 1e-12 * config.horizon) {
    throw DimensionError("bundle horizon differs from the scheme's T");
  }
  const TamingKind taming = taming_for(config.kind);
  const bool milstein = config.kind == SchemeKind::TamedMilstein;

  SimulationResult result;
  if (keep_trajectory) result.trajectory.reserve(config.steps + 1);
  if (observer) observer(initial);
  if (keep_trajectory) result.trajectory.push_back(initial);

  StepWorkspace ws;
  ParticleEnsemble current = std::move(initial);
  current.time_index = 0;
  for (std::size_t k = 0; k < config.steps; ++k) {
    current = advance({model, current, bundle, k, taming, milstein, &config}, ws);
    if (observer) observer(current);
    if (keep_trajectory) result.trajectory.push_back(current);
  }
  result.final_state = std::move(current);
  return result;
}

}  // namespace mvsde
