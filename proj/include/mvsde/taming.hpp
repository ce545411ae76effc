#pragma once

#include <cstddef>
#include <cstdint>

#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"

namespace mvsde {

/// EulerHalf divides by 1 + n^{-1/2}|x|^{rho/2}, MilsteinFull by
/// 1 + n^{-1}|x|^{rho}; None leaves coefficients untouched. |x| is the
/// Euclidean norm of the whole state.
enum class TamingKind { EulerHalf, MilsteinFull, None };

/// Shared denominator for b, sigma and sigma0 at one evaluation point.
/// Always >= 1. For rho = 0 the coefficients are globally Lipschitz and no
/// taming is applied (denominator 1).
double taming_denominator(ConstVectorRef x, double rho, std::size_t n, TamingKind kind);

template <typename Derived>
auto tame(const Eigen::MatrixBase<Derived>& value, ConstVectorRef x, double rho, std::size_t n,
          TamingKind kind) {
  return (value / taming_denominator(x, rho, n, kind)).eval();
}

/// Largest observed ratio of each tamed quantity to its growth envelope
/// K min{ n^a (1 + |x| + W2(mu, delta0)), |untamed| }, with a = 1/2 for the
/// drift and the x-derivative products, a = 1/4 for the diffusions and the
/// Lions-derivative products.
struct EnvelopeRatios {
  double drift = 0.0;
  double diffusion = 0.0;
  double common_diffusion = 0.0;
  double dx_products = 0.0;   // |d_x sigma^{(u,v)}| |sigma^n| and sigma0 analogues
  double dmu_products = 0.0;  // |d_mu sigma^{(u,v)}(x,mu,y)| |sigma^n| and analogues
  bool finite = true;

  double max() const;
};

EnvelopeRatios envelope_ratios_at(const ModelSpec& model, ConstVectorRef x, const EmpiricalMeasureView& mu,
                                  std::size_t n, TamingKind kind);

struct EnvelopeReport {
  EnvelopeRatios worst;
  double fitted_k = 0.0;
  std::size_t non_finite = 0;
  std::size_t samples = 0;
  bool pass = false;
};

/// Samples states with |x| log-uniform on [1e-3, 1e6] together with small
/// random ensembles, and fits K as the worst ratio. Passes when every
/// sample is finite and K < k_bound.
EnvelopeReport check_growth_envelope(const ModelSpec& model, std::size_t n, TamingKind kind,
                                     std::size_t samples, std::uint64_t seed = 11, double k_bound = 1e3);

}  // namespace mvsde
