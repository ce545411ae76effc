#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mvsde/measure.hpp"
#include "mvsde/philox.hpp"

namespace mvsde {

using DriftFn = std::function<void(double t, ConstVectorRef x, const EmpiricalMeasureView& mu, VectorRef out)>;
using DiffusionFn =
    std::function<void(double t, ConstVectorRef x, const EmpiricalMeasureView& mu, MatrixRef out)>;
/// Gradient in x of the (u,v) entry of a diffusion matrix.
using DiffusionDxFn = std::function<void(double t, ConstVectorRef x, const EmpiricalMeasureView& mu, int u,
                                         int v, VectorRef out)>;
/// Lions derivative of the (u,v) entry, evaluated at the point y.
using DiffusionDmuFn = std::function<void(double t, ConstVectorRef x, const EmpiricalMeasureView& mu,
                                          ConstVectorRef y, int u, int v, VectorRef out)>;
using InitialSampler = std::function<Vector(CounterStream& rng)>;

/// Coefficients of a McKean-Vlasov SDE with common noise,
///
///   dX = b(t, X, mu) dt + sigma(t, X, mu) dW + sigma0(t, X, mu) dW0,
///
/// with X in R^d, W in R^m and W0 in R^m0. `rho` is the super-linearity
/// exponent that drives taming. Derivative callbacks may be left empty, in
/// which case they are treated as identically zero; the schemes skip the
/// corresponding correction work.
///
/// A ModelSpec is immutable once built; every callback must be pure.
struct ModelSpec {
  std::string id;
  int d = 1;
  int m = 1;
  int m0 = 0;
  double rho = 0.0;

  DriftFn drift;
  DiffusionFn diffusion;
  DiffusionFn common_diffusion;
  DiffusionDxFn diffusion_dx;
  DiffusionDxFn common_diffusion_dx;
  DiffusionDmuFn diffusion_dmu;
  DiffusionDmuFn common_diffusion_dmu;
  InitialSampler initial_sampler;

  // Evaluation helpers that fill zeros for absent callbacks.
  Vector eval_drift(double t, ConstVectorRef x, const EmpiricalMeasureView& mu) const;
  Matrix eval_diffusion(double t, ConstVectorRef x, const EmpiricalMeasureView& mu) const;
  Matrix eval_common_diffusion(double t, ConstVectorRef x, const EmpiricalMeasureView& mu) const;
  Vector eval_diffusion_dx(double t, ConstVectorRef x, const EmpiricalMeasureView& mu, int u, int v) const;
  Vector eval_common_diffusion_dx(double t, ConstVectorRef x, const EmpiricalMeasureView& mu, int u,
                                  int v) const;
  Vector eval_diffusion_dmu(double t, ConstVectorRef x, const EmpiricalMeasureView& mu, ConstVectorRef y,
                            int u, int v) const;
  Vector eval_common_diffusion_dmu(double t, ConstVectorRef x, const EmpiricalMeasureView& mu,
                                   ConstVectorRef y, int u, int v) const;
};

/// Mean-field 3/2 stochastic volatility model in R^2:
/// b = lambda x (mu_param - |x|) + E[X], sigma = xi |x|^{3/2}.
ModelSpec builtin_three_halves(double lambda, double mu_param, const Matrix& xi, const Vector& x0);
ModelSpec builtin_three_halves();

/// Mean-field double well: b = x(1 - x^2) + E[X], sigma = s (1 - x^2).
ModelSpec builtin_double_well(double sigma = 0.3, double x0 = 1.0);

/// Double well with common noise sigma0 = sigma; E[X] is the mean of the
/// ensemble conditional on one common-noise path.
ModelSpec builtin_double_well_common(double sigma = 0.1, double x0 = 1.0);

/// Double well whose idiosyncratic diffusion depends on the measure,
/// sigma = 0.3(1 - x^2) + c E[X], so that the Lions-derivative corrections
/// are non-trivial (d/dmu of c int y mu(dy) is the constant c).
ModelSpec builtin_measure_coupled_diffusion(double c = 0.2, double x0 = 1.0);

/// Builds a built-in model from its string id and named scalar/list
/// parameters. Throws std::invalid_argument for unknown ids or parameters.
ModelSpec make_builtin(const std::string& id, const std::map<std::string, std::vector<double>>& params);

/// Names of the parameters accepted by a built-in id.
std::vector<std::string> builtin_parameter_names(const std::string& id);

/// Deterministic starting point; ignores the random stream.
InitialSampler constant_initial(Vector x0);

// Assumption spot-checks. Each field is the largest observed ratio of an
// assumption's left side to its right side over the sampled points.
struct AuditOptions {
  double p0 = 4.0;
  double p1 = 4.0;
  double violation_bound = 100.0;
  int ensemble_size = 4;
  std::uint64_t seed = 7;
};

struct AuditReport {
  double coercivity = 0.0;
  double monotonicity = 0.0;
  double polynomial_lipschitz = 0.0;
  bool coercivity_violated = false;
  bool monotonicity_violated = false;
  bool polynomial_lipschitz_violated = false;
  std::size_t non_finite = 0;
  std::size_t samples = 0;
};

AuditReport audit_assumptions(const ModelSpec& model, std::size_t sample_count, double radius,
                              const AuditOptions& options = {});

}  // namespace mvsde
