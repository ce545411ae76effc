#include <cmath>
#include <vector>

#include <omp.h>

#include "doctest.h"
#include "mvsde/harness.hpp"

using namespace mvsde;

namespace {

ModelSpec linear_ode() {
  ModelSpec model;
  model.id = "linear_ode";
  model.d = 1;
  model.m = 1;
  model.drift = [](double, ConstVectorRef x, const EmpiricalMeasureView&, VectorRef out) { out[0] = -x[0]; };
  model.initial_sampler = constant_initial(Vector::Ones(1));
  return model;
}

// Geometric Brownian motion with a mean-field pull.
ModelSpec linear_sde() {
  ModelSpec model = linear_ode();
  model.id = "linear_sde";
  model.drift = [](double, ConstVectorRef x, const EmpiricalMeasureView& mu, VectorRef out) {
    out[0] = -x[0] + 0.5 * mean(mu)[0];
  };
  model.diffusion = [](double, ConstVectorRef x, const EmpiricalMeasureView&, MatrixRef out) { out(0, 0) = 0.5 * x[0]; };
  model.diffusion_dx = [](double, ConstVectorRef, const EmpiricalMeasureView&, int, int, VectorRef out) {
    out[0] = 0.5;
  };
  return model;
}

}  // namespace

TEST_CASE("two-level error examples") {
  const auto fine = ParticleEnsemble::from_rows({{1}, {2}});
  const auto coarse = ParticleEnsemble::from_rows({{0}, {0}});
  CHECK(two_level_error(fine, coarse, 2) == doctest::Approx(std::sqrt(2.5)));
  CHECK(two_level_error(fine, coarse, 4) == doctest::Approx(std::pow(8.5, 0.25)));
  CHECK(two_level_error(fine, fine, 2) == 0.0);
  const auto v = ParticleEnsemble::from_rows({{3, 4}});
  const auto o = ParticleEnsemble::from_rows({{0, 0}});
  CHECK(two_level_error(v, o, 6) == doctest::Approx(5.0));
  CHECK_THROWS_AS(two_level_error(fine, coarse, 3), std::invalid_argument);
  CHECK_THROWS_AS(two_level_error(fine, coarse, 0), std::invalid_argument);
  CHECK_THROWS_AS(two_level_error(fine, v, 2), DimensionError);
}

TEST_CASE("least-squares slope") {
  CHECK(least_squares_slope({1, 2, 3, 4}, {3, 5, 7, 9}) == doctest::Approx(2.0));
  CHECK(least_squares_slope({0, 1, 2}, {0, 1, 0}) == doctest::Approx(0.0));
  CHECK_THROWS(least_squares_slope({1}, {1}));
}

TEST_CASE("Euler on a linear ODE converges at first order") {
  StudyConfig config;
  config.particles = 4;
  config.level_min = 3;
  config.level_max = 10;
  const auto report = convergence_study(linear_ode(), config);
  CHECK(report.levels.size() == 8);
  CHECK(report.steps_at(0) == 8);
  CHECK(report.slope[0] >= 0.9);
  CHECK(report.slope[0] <= 1.1);
  for (std::size_t li = 1; li < report.levels.size(); ++li) CHECK(report.rmse[li][0] < report.rmse[li - 1][0]);
}

TEST_CASE("rates on geometric Brownian motion") {
  StudyConfig config;
  config.particles = 400;
  config.level_min = 4;
  config.level_max = 9;
  config.p_values = {2};
  config.scheme.kind = SchemeKind::TamedEuler;
  const double euler = convergence_study(linear_sde(), config).slope[0];
  CHECK(euler == doctest::Approx(0.5).epsilon(0.3));
  config.scheme.kind = SchemeKind::TamedMilstein;
  const double milstein = convergence_study(linear_sde(), config).slope[0];
  CHECK(milstein == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("outer realizations are averaged before the root") {
  const auto model = linear_sde();
  StudyConfig config;
  config.particles = 30;
  config.level_min = 3;
  config.level_max = 5;
  config.outer = 3;
  config.p_values = {2, 4};
  config.seed = 5;
  const auto report = convergence_study(model, config);

  // Oracle: fresh generate per (outer, level) grid, no reuse of the study's bundle.
  for (std::size_t pi = 0; pi < 2; ++pi) {
    const int p = config.p_values[pi];
    for (int level = 3; level <= 5; ++level) {
      double total = 0;
      for (std::uint32_t o = 0; o < 3; ++o) {
        const auto base = generate(5, 30, 1, 0, std::size_t{1} << 5, 1.0, o);
        auto fine_bundle = base;
        for (int l = 5; l > level; --l) fine_bundle = coarsen(fine_bundle);
        const auto coarse_bundle = coarsen(fine_bundle);
        SchemeConfig s = config.scheme;
        s.steps = fine_bundle.steps();
        const auto init = sample_initial_states(model, 30, 5, o);
        const auto fine = simulate(model, s, fine_bundle, init).final_state;
        s.steps = coarse_bundle.steps();
        const auto coarse = simulate(model, s, coarse_bundle, init).final_state;
        total += std::pow(two_level_error(fine, coarse, p), p);
      }
      CHECK(report.rmse[static_cast<std::size_t>(level - 3)][pi] ==
            doctest::Approx(std::pow(total / 3, 1.0 / p)).epsilon(1e-12));
    }
  }
  const auto refit = report.refit();
  CHECK(refit == report.slope);
}

TEST_CASE("study results do not depend on the worker count") {
  StudyConfig config;
  config.particles = 64;
  config.level_min = 3;
  config.level_max = 6;
  config.scheme.kind = SchemeKind::TamedMilstein;
  const auto model = builtin_measure_coupled_diffusion();
  omp_set_num_threads(1);
  const auto serial = convergence_study(model, config);
  omp_set_num_threads(4);
  const auto parallel = convergence_study(model, config);
  CHECK(serial.rmse == parallel.rmse);
  CHECK(serial.slope == parallel.slope);
}

TEST_CASE("study validation") {
  StudyConfig config;
  config.level_max = 2;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = {};
  config.p_values = {3};
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = {};
  config.particles = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("blow-ups in a study carry the level") {
  StudyConfig config;
  config.particles = 4;
  config.level_min = 2;
  config.level_max = 3;
  config.scheme.kind = SchemeKind::UntamedEuler;
  try {
    convergence_study(builtin_double_well(0.3, 10.0), config);
    FAIL("expected a blow-up");
  } catch (const BlowUpError& e) {
    CHECK(e.context().find("level") != std::string::npos);
  }
}

TEST_CASE("chaos against the reference itself is zero") {
  SchemeConfig scheme;
  scheme.steps = 16;
  const auto points = chaos_trend(builtin_double_well(), scheme, {64}, 64, 3, 2);
  REQUIRE(points.size() == 1);
  CHECK(points[0].particles == 64);
  CHECK(points[0].w2 == 0.0);
}

TEST_CASE("chaos input validation") {
  SchemeConfig scheme;
  scheme.steps = 8;
  CHECK_THROWS_AS(chaos_trend(builtin_three_halves(), scheme, {4}, 8, 1), DimensionError);
  CHECK_THROWS_AS(chaos_trend(builtin_double_well(), scheme, {16}, 8, 1), std::invalid_argument);
  CHECK_THROWS_AS(chaos_trend(builtin_double_well(), scheme, {4}, 8, 1, 0), std::invalid_argument);
}

TEST_CASE("moment trace of a still model is constant") {
  ModelSpec model;
  model.d = 1;
  model.m = 1;
  model.initial_sampler = constant_initial(Vector::Constant(1, 2.0));
  SchemeConfig scheme;
  scheme.steps = 8;
  const auto trace = moment_trace(model, scheme, 5, {2, 4, 6}, 1);
  REQUIRE(trace.moments.size() == 9);
  for (const auto& row : trace.moments) {
    CHECK(row[0] == doctest::Approx(4.0));
    CHECK(row[1] == doctest::Approx(16.0));
    CHECK(row[2] == doctest::Approx(64.0));
  }
  CHECK(trace.max_over_steps[2] == doctest::Approx(64.0));
  CHECK_FALSE(trace.blow_up.has_value());
}

TEST_CASE("moment trace records blow-ups") {
  SchemeConfig scheme;
  scheme.steps = 8;
  scheme.kind = SchemeKind::UntamedEuler;
  const auto trace = moment_trace(builtin_double_well(0.3, 10.0), scheme, 10, {2}, 1);
  REQUIRE(trace.blow_up.has_value());
  CHECK(trace.moments.size() == trace.blow_up->step() + 1);
}

TEST_CASE("moment traces on a shared noise grid") {
  SchemeConfig scheme;
  scheme.steps = 16;
  const auto model = builtin_double_well(0.3, 1.0);
  const auto a = moment_trace(model, scheme, 50, {2}, 4, 64);
  const auto b = moment_trace(model, scheme, 50, {2}, 4, 64);
  CHECK(a.moments == b.moments);
  CHECK_THROWS(moment_trace(model, scheme, 50, {2}, 4, 48));
}

TEST_CASE("empirical moments") {
  const auto e = ParticleEnsemble::from_rows({{3, 4}, {0, 0}});
  CHECK(empirical_moment(e, 2) == doctest::Approx(12.5));
  CHECK(empirical_moment(e, 1) == doctest::Approx(2.5));
}
