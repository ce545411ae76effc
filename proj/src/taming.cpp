#include "mvsde/taming.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvsde {

double taming_denominator(ConstVectorRef x, double rho, std::size_t n, TamingKind kind) {
  if (n == 0) throw std::invalid_argument("taming needs n >= 1");
  if (rho < 0.0) throw std::invalid_argument("taming needs rho >= 0");
  if (kind == TamingKind::None || rho == 0.0) return 1.0;
  const double norm_sq = x.squaredNorm();
  const double steps = static_cast<double>(n);
  if (kind == TamingKind::EulerHalf) {
    return 1.0 + std::pow(norm_sq, rho / 4.0) / std::sqrt(steps);
  }
  return 1.0 + std::pow(norm_sq, rho / 2.0) / steps;
}

double EnvelopeRatios::max() const {
  return std::max({drift, diffusion, common_diffusion, dx_products, dmu_products});
}

namespace {

// Ratio against K min{envelope, untamed}.
double envelope_ratio(double tamed, double untamed, double envelope) {
  const double vs_untamed = tamed == 0.0 ? 0.0 : tamed / untamed;
  return std::max(tamed / envelope, vs_untamed);
}

}  // namespace

EnvelopeRatios envelope_ratios_at(const ModelSpec& model, ConstVectorRef x, const EmpiricalMeasureView& mu,
                                  std::size_t n, TamingKind kind) {
  EnvelopeRatios r;
  const double denom = taming_denominator(x, model.rho, n, kind);
  const double steps = static_cast<double>(n);
  const double base = 1.0 + x.norm() + std::sqrt(w2_sq_to_delta0(mu));
  const double half = std::sqrt(steps) * base;
  const double quarter = std::pow(steps, 0.25) * base;

  const Vector b = model.eval_drift(0.0, x, mu);
  const Matrix sig = model.eval_diffusion(0.0, x, mu);
  const Matrix sig0 = model.eval_common_diffusion(0.0, x, mu);
  if (!b.allFinite() || !sig.allFinite() || !sig0.allFinite()) {
    r.finite = false;
    return r;
  }
  const double b_abs = b.norm();
  const double s_abs = sig.norm();
  const double s0_abs = sig0.norm();
  r.drift = envelope_ratio(b_abs / denom, b_abs, half);
  r.diffusion = envelope_ratio(s_abs / denom, s_abs, quarter);
  r.common_diffusion = envelope_ratio(s0_abs / denom, s0_abs, quarter);

  if (kind != TamingKind::MilsteinFull) return r;

  auto track = [&](double& slot, double deriv_abs, double envelope) {
    if (!std::isfinite(deriv_abs)) {
      r.finite = false;
      return;
    }
    slot = std::max({slot, envelope_ratio(deriv_abs * s_abs / denom, deriv_abs * s_abs, envelope),
                     envelope_ratio(deriv_abs * s0_abs / denom, deriv_abs * s0_abs, envelope)});
  };

  for (int u = 0; u < model.d; ++u) {
    for (int v = 0; v < model.m; ++v) {
      track(r.dx_products, model.eval_diffusion_dx(0.0, x, mu, u, v).norm(), half);
      for (std::size_t j = 0; j < mu.particles; ++j) {
        track(r.dmu_products, model.eval_diffusion_dmu(0.0, x, mu, mu.row(j), u, v).norm(), quarter);
      }
    }
    for (int v = 0; v < model.m0; ++v) {
      track(r.dx_products, model.eval_common_diffusion_dx(0.0, x, mu, u, v).norm(), half);
      for (std::size_t j = 0; j < mu.particles; ++j) {
        track(r.dmu_products, model.eval_common_diffusion_dmu(0.0, x, mu, mu.row(j), u, v).norm(), quarter);
      }
    }
  }
  return r;
}

namespace {

Vector log_uniform_point(CounterStream& rng, int d, double lo, double hi) {
  Vector dir(d);
  for (int c = 0; c < d; ++c) dir[c] = rng.normal();
  const double norm = dir.norm();
  if (norm == 0.0) dir = Vector::Unit(d, 0);
  else dir /= norm;
  const double magnitude = lo * std::pow(hi / lo, rng.uniform());
  return dir * magnitude;
}

}  // namespace

EnvelopeReport check_growth_envelope(const ModelSpec& model, std::size_t n, TamingKind kind,
                                     std::size_t samples, std::uint64_t seed, double k_bound) {
  if (samples == 0) throw std::invalid_argument("check_growth_envelope: samples must be >= 1");
  constexpr int kEnsembleSize = 4;
  EnvelopeReport report;
  for (std::size_t s = 0; s < samples; ++s) {
    CounterStream rng(seed, 0, StreamTag::Sampling, static_cast<std::uint32_t>(s));
    const Vector x = log_uniform_point(rng, model.d, 1e-3, 1e6);
    OwnedEnsemble ens;
    ens.particles = kEnsembleSize;
    ens.dim = static_cast<std::size_t>(model.d);
    for (int j = 0; j < kEnsembleSize; ++j) {
      const Vector y = log_uniform_point(rng, model.d, 1e-3, 1e6);
      ens.data.insert(ens.data.end(), y.data(), y.data() + model.d);
    }
    const EnvelopeRatios r = envelope_ratios_at(model, x, ens.view(), n, kind);
    ++report.samples;
    if (!r.finite || !std::isfinite(r.max())) {
      ++report.non_finite;
      continue;
    }
    report.worst.drift = std::max(report.worst.drift, r.drift);
    report.worst.diffusion = std::max(report.worst.diffusion, r.diffusion);
    report.worst.common_diffusion = std::max(report.worst.common_diffusion, r.common_diffusion);
    report.worst.dx_products = std::max(report.worst.dx_products, r.dx_products);
    report.worst.dmu_products = std::max(report.worst.dmu_products, r.dmu_products);
  }
  report.fitted_k = report.worst.max();
  report.pass = report.non_finite == 0 && report.fitted_k < k_bound;
  return report;
}

}  // namespace mvsde
