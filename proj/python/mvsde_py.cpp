#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "mvsde/config.hpp"
#include "mvsde/harness.hpp"

namespace py = pybind11;
using namespace mvsde;

namespace {

using Params = std::map<std::string, std::vector<double>>;

py::array_t<double> to_array(const ParticleEnsemble& e) {
  py::array_t<double> out({e.particles, e.dim});
  std::copy(e.states.begin(), e.states.end(), out.mutable_data());
  return out;
}

ParticleEnsemble from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DimensionError("expected an (N, d) array");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto d = static_cast<std::size_t>(a.shape(1));
  return {n, d, std::vector<double>(a.data(), a.data() + n * d)};
}

SchemeConfig scheme_config(const std::string& kind, std::size_t steps, double horizon, int substeps,
                           bool measure_corrections) {
  SchemeConfig c;
  if (kind == "tamed_euler") c.kind = SchemeKind::TamedEuler;
  else if (kind == "tamed_milstein") c.kind = SchemeKind::TamedMilstein;
  else if (kind == "untamed_euler") c.kind = SchemeKind::UntamedEuler;
  else throw std::invalid_argument("unknown scheme '" + kind + "'");
  c.steps = steps;
  c.horizon = horizon;
  if (substeps > 0) c.di_mode = DoubleIntegralMode::substep(substeps);
  c.measure_corrections = measure_corrections;
  return c;
}

EmpiricalMeasureView scalar_view(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return {std::span<const double>(a.data(), static_cast<std::size_t>(a.size())), static_cast<std::size_t>(a.size()),
          1};
}

}  // namespace

PYBIND11_MODULE(mvsde, m) {
  m.doc() = "Tamed Euler and Milstein particle schemes for McKean-Vlasov SDEs with common noise.";

  py::register_exception<BlowUpError>(m, "BlowUpError", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "simulate",
      [](const std::string& model_id, const Params& params, const std::string& scheme, std::size_t steps,
         std::size_t particles, std::uint64_t seed, double horizon, int substeps, bool measure_corrections,
         std::optional<py::array_t<double, py::array::c_style | py::array::forcecast>> initial) {
        const ModelSpec model = make_builtin(model_id, params);
        const SchemeConfig config = scheme_config(scheme, steps, horizon, substeps, measure_corrections);
        ParticleEnsemble init = initial ? from_array(*initial) : sample_initial_states(model, particles, seed);
        const BrownianBundle bundle = generate(seed, init.particles, model.m, model.m0, steps, horizon);
        ParticleEnsemble out;
        {
          py::gil_scoped_release release;
          out = simulate(model, config, bundle, std::move(init)).final_state;
        }
        return to_array(out);
      },
      py::arg("model"), py::arg("params") = Params{}, py::arg("scheme") = "tamed_euler", py::arg("steps") = 256,
      py::arg("particles") = 1000, py::arg("seed") = 42, py::arg("horizon") = 1.0, py::arg("substeps") = 0,
      py::arg("measure_corrections") = true, py::arg("initial") = py::none(),
      "Terminal states, shape (N, d).");

  m.def(
      "convergence_study",
      [](const std::string& model_id, const Params& params, const std::string& scheme, int level_min, int level_max,
         std::size_t particles, std::vector<int> p_values, std::size_t outer, std::uint64_t seed) {
        StudyConfig c;
        c.scheme = scheme_config(scheme, 1, 1.0, 0, true);
        c.level_min = level_min;
        c.level_max = level_max;
        c.particles = particles;
        c.p_values = std::move(p_values);
        c.outer = outer;
        c.seed = seed;
        const ModelSpec model = make_builtin(model_id, params);
        RateReport r;
        {
          py::gil_scoped_release release;
          r = convergence_study(model, c);
        }
        py::dict out;
        out["levels"] = r.levels;
        out["p_values"] = r.p_values;
        out["rmse"] = r.rmse;
        out["slope"] = r.slope;
        return out;
      },
      py::arg("model"), py::arg("params") = Params{}, py::arg("scheme") = "tamed_euler", py::arg("level_min") = 3,
      py::arg("level_max") = 9, py::arg("particles") = 1000, py::arg("p_values") = std::vector<int>{2, 4, 6},
      py::arg("outer") = 1, py::arg("seed") = 42);

  m.def(
      "chaos_trend",
      [](const std::string& model_id, const Params& params, const std::string& scheme, std::size_t steps,
         const std::vector<std::size_t>& sizes, std::size_t reference, std::uint64_t seed, std::size_t repeats) {
        const ModelSpec model = make_builtin(model_id, params);
        std::vector<std::pair<std::size_t, double>> out;
        for (const auto& pt : chaos_trend(model, scheme_config(scheme, steps, 1.0, 0, true), sizes, reference, seed,
                                          repeats)) {
          out.emplace_back(pt.particles, pt.w2);
        }
        return out;
      },
      py::arg("model"), py::arg("params") = Params{}, py::arg("scheme") = "tamed_euler", py::arg("steps") = 64,
      py::arg("sizes") = std::vector<std::size_t>{32, 128, 512}, py::arg("reference") = 4096, py::arg("seed") = 42,
      py::arg("repeats") = 1, "List of (N, mean W2) pairs.");

  m.def(
      "moment_trace",
      [](const std::string& model_id, const Params& params, const std::string& scheme, std::size_t steps,
         std::size_t particles, std::vector<int> p_values, std::uint64_t seed) {
        const ModelSpec model = make_builtin(model_id, params);
        const MomentTrace t = moment_trace(model, scheme_config(scheme, steps, 1.0, 0, true), particles, p_values, seed);
        py::dict out;
        out["moments"] = t.moments;
        out["max_over_steps"] = t.max_over_steps;
        out["blow_up"] = t.blow_up ? py::object(py::str(t.blow_up->what())) : py::object(py::none());
        return out;
      },
      py::arg("model"), py::arg("params") = Params{}, py::arg("scheme") = "tamed_euler", py::arg("steps") = 256,
      py::arg("particles") = 1000, py::arg("p_values") = std::vector<int>{2, 4, 6}, py::arg("seed") = 42);

  m.def(
      "w2_1d",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return w2_1d_exact(scalar_view(a), scalar_view(b));
      },
      "Exact W2 between two 1-d empirical measures.");

  m.def(
      "taming_denominator",
      [](const std::vector<double>& x, double rho, std::size_t n, const std::string& kind) {
        TamingKind k = TamingKind::None;
        if (kind == "euler") k = TamingKind::EulerHalf;
        else if (kind == "milstein") k = TamingKind::MilsteinFull;
        else if (kind != "none") throw std::invalid_argument("kind must be euler, milstein or none");
        return taming_denominator(Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())), rho, n, k);
      },
      py::arg("x"), py::arg("rho"), py::arg("n"), py::arg("kind") = "euler");

  m.def(
      "run_config",
      [](const std::string& text) {
        const RunConfig config = parse_config(text);
        std::ostringstream csv, summary;
        const int status = run(config, csv, summary);
        return py::make_tuple(status, csv.str(), summary.str());
      },
      py::arg("text"), "Runs a configuration; returns (exit status, CSV text, summary text).");
}
