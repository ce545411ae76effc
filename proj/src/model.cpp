#include "mvsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace mvsde {

Vector ModelSpec::eval_drift(double t, ConstVectorRef x, const EmpiricalMeasureView& mu) const {
  Vector out = Vector::Zero(d);
  if (drift) drift(t, x, mu, out);
  return out;
}

Matrix ModelSpec::eval_diffusion(double t, ConstVectorRef x, const EmpiricalMeasureView& mu) const {
  Matrix out = Matrix::Zero(d, m);
  if (diffusion && m > 0) diffusion(t, x, mu, out);
  return out;
}

Matrix ModelSpec::eval_common_diffusion(double t, ConstVectorRef x, const EmpiricalMeasureView& mu) const {
  Matrix out = Matrix::Zero(d, m0);
  if (common_diffusion && m0 > 0) common_diffusion(t, x, mu, out);
  return out;
}

Vector ModelSpec::eval_diffusion_dx(double t, ConstVectorRef x, const EmpiricalMeasureView& mu, int u,
                                    int v) const {
  Vector out = Vector::Zero(d);
  if (diffusion_dx) diffusion_dx(t, x, mu, u, v, out);
  return out;
}

Vector ModelSpec::eval_common_diffusion_dx(double t, ConstVectorRef x, const EmpiricalMeasureView& mu, int u,
                                           int v) const {
  Vector out = Vector::Zero(d);
  if (common_diffusion_dx) common_diffusion_dx(t, x, mu, u, v, out);
  return out;
}

Vector ModelSpec::eval_diffusion_dmu(double t, ConstVectorRef x, const EmpiricalMeasureView& mu,
                                     ConstVectorRef y, int u, int v) const {
  Vector out = Vector::Zero(d);
  if (diffusion_dmu) diffusion_dmu(t, x, mu, y, u, v, out);
  return out;
}

Vector ModelSpec::eval_common_diffusion_dmu(double t, ConstVectorRef x, const EmpiricalMeasureView& mu,
                                            ConstVectorRef y, int u, int v) const {
  Vector out = Vector::Zero(d);
  if (common_diffusion_dmu) common_diffusion_dmu(t, x, mu, y, u, v, out);
  return out;
}

InitialSampler constant_initial(Vector x0) {
  return [x0 = std::move(x0)](CounterStream&) { return x0; };
}

ModelSpec builtin_three_halves(double lambda, double mu_param, const Matrix& xi, const Vector& x0) {
  if (xi.rows() != 2 || xi.cols() != 2 || !xi.allFinite()) {
    throw std::invalid_argument("three_halves: xi must be a finite 2x2 matrix");
  }
  if (x0.size() != 2) throw std::invalid_argument("three_halves: x0 must have two components");

  ModelSpec model;
  model.id = "three_halves";
  model.d = 2;
  model.m = 2;
  model.m0 = 0;
  model.rho = 2.0;
  model.drift = [lambda, mu_param](double, ConstVectorRef x, const EmpiricalMeasureView& mu, VectorRef out) {
    out = lambda * x * (mu_param - x.norm()) + mean(mu);
  };
  model.diffusion = [xi](double, ConstVectorRef x, const EmpiricalMeasureView&, MatrixRef out) {
    const double r = x.norm();
    out = xi * (r * std::sqrt(r));
  };
  // d/dx of xi_uv |x|^{3/2} = xi_uv (3/2) |x|^{-1/2} x, continuous at 0.
  model.diffusion_dx = [xi](double, ConstVectorRef x, const EmpiricalMeasureView&, int u, int v, VectorRef out) {
    const double r = x.norm();
    if (r == 0.0) {
      out.setZero();
      return;
    }
    out = xi(u, v) * 1.5 / std::sqrt(r) * x;
  };
  model.initial_sampler = constant_initial(x0);
  return model;
}

ModelSpec builtin_three_halves() {
  Matrix xi(2, 2);
  xi << 2.0, 1.0, 1.0, 2.0;
  xi /= std::sqrt(10.0);
  return builtin_three_halves(2.5, 1.0, xi, Vector::Ones(2));
}

namespace {

ModelSpec double_well_base(double x0) {
  ModelSpec model;
  model.d = 1;
  model.m = 1;
  model.rho = 4.0;
  model.drift = [](double, ConstVectorRef x, const EmpiricalMeasureView& mu, VectorRef out) {
    out[0] = x[0] * (1.0 - x[0] * x[0]) + mean(mu)[0];
  };
  model.initial_sampler = constant_initial(Vector::Constant(1, x0));
  return model;
}

DiffusionFn well_diffusion(double sigma) {
  return [sigma](double, ConstVectorRef x, const EmpiricalMeasureView&, MatrixRef out) {
    out(0, 0) = sigma * (1.0 - x[0] * x[0]);
  };
}

DiffusionDxFn well_diffusion_dx(double sigma) {
  return [sigma](double, ConstVectorRef x, const EmpiricalMeasureView&, int, int, VectorRef out) {
    out[0] = -2.0 * sigma * x[0];
  };
}

}  // namespace

ModelSpec builtin_double_well(double sigma, double x0) {
  ModelSpec model = double_well_base(x0);
  model.id = "double_well";
  model.m0 = 0;
  model.diffusion = well_diffusion(sigma);
  model.diffusion_dx = well_diffusion_dx(sigma);
  return model;
}

ModelSpec builtin_double_well_common(double sigma, double x0) {
  ModelSpec model = double_well_base(x0);
  model.id = "double_well_common";
  model.m0 = 1;
  model.diffusion = well_diffusion(sigma);
  model.diffusion_dx = well_diffusion_dx(sigma);
  model.common_diffusion = well_diffusion(sigma);
  model.common_diffusion_dx = well_diffusion_dx(sigma);
  return model;
}

ModelSpec builtin_measure_coupled_diffusion(double c, double x0) {
  ModelSpec model = double_well_base(x0);
  model.id = "measure_coupled";
  model.m0 = 1;
  model.diffusion = [c](double, ConstVectorRef x, const EmpiricalMeasureView& mu, MatrixRef out) {
    out(0, 0) = 0.3 * (1.0 - x[0] * x[0]) + c * mean(mu)[0];
  };
  model.diffusion_dx = well_diffusion_dx(0.3);
  model.diffusion_dmu = [c](double, ConstVectorRef, const EmpiricalMeasureView&, ConstVectorRef, int, int,
                            VectorRef out) { out[0] = c; };
  model.common_diffusion = well_diffusion(0.1);
  model.common_diffusion_dx = well_diffusion_dx(0.1);
  return model;
}

std::vector<std::string> builtin_parameter_names(const std::string& id) {
  if (id == "three_halves") return {"lambda", "mu", "xi", "x0"};
  if (id == "double_well" || id == "double_well_common") return {"sigma", "x0"};
  if (id == "measure_coupled") return {"c", "x0"};
  throw std::invalid_argument("unknown model id '" + id + "'");
}

namespace {

double scalar_param(const std::map<std::string, std::vector<double>>& params, const std::string& key,
                    double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (it->second.size() != 1) throw std::invalid_argument("parameter '" + key + "' expects one value");
  return it->second.front();
}

}  // namespace

ModelSpec make_builtin(const std::string& id, const std::map<std::string, std::vector<double>>& params) {
  const auto allowed = builtin_parameter_names(id);
  for (const auto& [key, value] : params) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument("parameter '" + key + "' is not valid for model '" + id + "'");
    }
  }

  if (id == "three_halves") {
    Matrix xi(2, 2);
    xi << 2.0, 1.0, 1.0, 2.0;
    xi /= std::sqrt(10.0);
    if (auto it = params.find("xi"); it != params.end()) {
      if (it->second.size() != 4) throw std::invalid_argument("parameter 'xi' expects 4 values (row-major)");
      xi << it->second[0], it->second[1], it->second[2], it->second[3];
    }
    Vector x0 = Vector::Ones(2);
    if (auto it = params.find("x0"); it != params.end()) {
      if (it->second.size() != 2) throw std::invalid_argument("parameter 'x0' expects 2 values");
      x0 << it->second[0], it->second[1];
    }
    return builtin_three_halves(scalar_param(params, "lambda", 2.5), scalar_param(params, "mu", 1.0), xi, x0);
  }
  if (id == "double_well") {
    return builtin_double_well(scalar_param(params, "sigma", 0.3), scalar_param(params, "x0", 1.0));
  }
  if (id == "double_well_common") {
    return builtin_double_well_common(scalar_param(params, "sigma", 0.1), scalar_param(params, "x0", 1.0));
  }
  return builtin_measure_coupled_diffusion(scalar_param(params, "c", 0.2), scalar_param(params, "x0", 1.0));
}

}  // namespace mvsde
