#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mvsde/model.hpp"

namespace mvsde {

namespace {

Vector sample_in_ball(CounterStream& rng, int d, double radius) {
  Vector dir(d);
  for (int c = 0; c < d; ++c) dir[c] = rng.normal();
  const double norm = dir.norm();
  if (norm == 0.0) return Vector::Zero(d);
  return dir / norm * (radius * rng.uniform());
}

// Exact W2^2 between two equal-size uniform empirical measures: the optimal
// coupling is a permutation, and the audit ensembles are tiny.
double w2_sq_small(const OwnedEnsemble& a, const OwnedEnsemble& b) {
  std::vector<std::size_t> perm(a.particles);
  std::iota(perm.begin(), perm.end(), 0);
  const auto va = a.view();
  const auto vb = b.view();
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) cost += (va.row(i) - vb.row(perm[i])).squaredNorm();
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.particles);
}

OwnedEnsemble sample_ensemble(CounterStream& rng, int size, int d, double radius) {
  OwnedEnsemble e;
  e.particles = static_cast<std::size_t>(size);
  e.dim = static_cast<std::size_t>(d);
  for (int i = 0; i < size; ++i) {
    const Vector x = sample_in_ball(rng, d, radius);
    e.data.insert(e.data.end(), x.data(), x.data() + d);
  }
  return e;
}

void update_max(double ratio, double& slot, bool& seen) {
  if (!seen || ratio > slot) slot = ratio;
  seen = true;
}

}  // namespace

AuditReport audit_assumptions(const ModelSpec& model, std::size_t sample_count, double radius,
                              const AuditOptions& options) {
  if (sample_count == 0) throw std::invalid_argument("audit_assumptions: sample_count must be >= 1");
  AuditReport report;
  bool seen_coercive = false, seen_monotone = false, seen_lipschitz = false;
  const int d = model.d;

  for (std::size_t s = 0; s < sample_count; ++s) {
    CounterStream rng(options.seed, 0, StreamTag::Sampling, static_cast<std::uint32_t>(s));
    const Vector x = sample_in_ball(rng, d, radius);
    const Vector xbar = sample_in_ball(rng, d, radius);
    const OwnedEnsemble ens = sample_ensemble(rng, options.ensemble_size, d, radius);
    // Every other sample shares the measure so the pure state part is probed.
    const OwnedEnsemble ens_bar =
        (s % 2 == 0) ? ens : sample_ensemble(rng, options.ensemble_size, d, radius);
    const auto mu = ens.view();
    const auto mu_bar = ens_bar.view();

    const Vector b = model.eval_drift(0.0, x, mu);
    const Vector b_bar = model.eval_drift(0.0, xbar, mu_bar);
    const Matrix sig = model.eval_diffusion(0.0, x, mu);
    const Matrix sig_bar = model.eval_diffusion(0.0, xbar, mu_bar);
    const Matrix sig0 = model.eval_common_diffusion(0.0, x, mu);
    const Matrix sig0_bar = model.eval_common_diffusion(0.0, xbar, mu_bar);
    if (!b.allFinite() || !b_bar.allFinite() || !sig.allFinite() || !sig_bar.allFinite() ||
        !sig0.allFinite() || !sig0_bar.allFinite()) {
      ++report.non_finite;
      continue;
    }
    ++report.samples;

    const double w2_delta_sq = w2_sq_to_delta0(mu);
    const double w2_pair_sq = w2_sq_small(ens, ens_bar);

    const double coercive_lhs =
        2.0 * x.dot(b) + (options.p0 - 1.0) * (sig.squaredNorm() + sig0.squaredNorm());
    const double coercive_rhs = std::pow(1.0 + x.norm(), 2) + w2_delta_sq;
    update_max(coercive_lhs / coercive_rhs, report.coercivity, seen_coercive);

    const double dx_sq = (x - xbar).squaredNorm();
    const double monotone_rhs = dx_sq + w2_pair_sq;
    if (monotone_rhs > 0.0) {
      const double monotone_lhs = 2.0 * (x - xbar).dot(b - b_bar) +
                                  (options.p1 - 1.0) * ((sig - sig_bar).squaredNorm() +
                                                        (sig0 - sig0_bar).squaredNorm());
      update_max(monotone_lhs / monotone_rhs, report.monotonicity, seen_monotone);

      const double lip_rhs =
          std::pow(1.0 + x.norm() + xbar.norm(), model.rho / 2.0) * std::sqrt(dx_sq) + std::sqrt(w2_pair_sq);
      update_max((b - b_bar).norm() / lip_rhs, report.polynomial_lipschitz, seen_lipschitz);
    }
  }

  report.coercivity_violated = report.coercivity > options.violation_bound;
  report.monotonicity_violated = report.monotonicity > options.violation_bound;
  report.polynomial_lipschitz_violated = report.polynomial_lipschitz > options.violation_bound;
  return report;
}

}  // namespace mvsde
