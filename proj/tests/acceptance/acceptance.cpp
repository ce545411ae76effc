// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mvsde/config.hpp"
#include "mvsde/harness.hpp"
#include "oracles.hpp"

using namespace mvsde;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

bool strictly_decreasing(const RateReport& r) {
  for (std::size_t li = 1; li < r.rmse.size(); ++li) {
    if (!(r.rmse[li][0] < r.rmse[li - 1][0])) return false;
  }
  return true;
}

Outcome rate_criterion(const ModelSpec& model, SchemeKind kind, int level_max, std::size_t particles,
                       std::size_t outer, double lo, double hi) {
  StudyConfig config;
  config.scheme.kind = kind;
  config.level_min = 3;
  config.level_max = level_max;
  config.particles = particles;
  config.outer = outer;
  config.p_values = {2};
  const RateReport r = convergence_study(model, config);
  const double slope = r.slope[0];
  const bool decreasing = strictly_decreasing(r);
  return {slope >= lo && slope <= hi && decreasing,
          "slope " + fmt("%.3f", slope) + " in [" + fmt("%.2f", lo) + ", " + fmt("%.2f", hi) + "]" +
              (decreasing ? ", rmse decreasing" : ", rmse NOT decreasing")};
}

Outcome moment_stability() {
  const std::vector<int> p_values{2, 4, 6};
  const std::vector<std::size_t> grids{256, 512, 1024};
  double worst = 0.0;
  std::string failing;
  bool finite = true;
  const std::vector<ModelSpec> models{builtin_three_halves(), builtin_double_well(0.3, 1.0),
                                      builtin_double_well_common(0.1, 1.0)};
  for (const auto& model : models) {
    for (auto kind : {SchemeKind::TamedEuler, SchemeKind::TamedMilstein}) {
      std::vector<std::vector<double>> maxima;
      for (std::size_t n : grids) {
        SchemeConfig scheme;
        scheme.kind = kind;
        scheme.steps = n;
        // One Brownian path on the finest grid, coarsened for the others.
        const MomentTrace trace = moment_trace(model, scheme, 1000, p_values, 42, grids.back());
        if (trace.blow_up) finite = false;
        for (double v : trace.max_over_steps) finite = finite && std::isfinite(v);
        maxima.push_back(trace.max_over_steps);
      }
      for (std::size_t pi = 0; pi < p_values.size(); ++pi) {
        double change = 0.0;
        for (std::size_t g = 1; g < grids.size(); ++g) {
          change = std::max(change, std::abs(maxima[g][pi] - maxima[g - 1][pi]) / maxima[g - 1][pi]);
        }
        worst = std::max(worst, change);
        if (change >= 0.20) {
          failing += " " + model.id + "/" + scheme_name(kind) + "/p=" + std::to_string(p_values[pi]) + " " +
                     fmt("%.3f", change);
        }
      }
    }
  }
  return {finite && worst < 0.20, std::string(finite ? "all finite" : "NON-FINITE") + ", worst relative change " +
                                      fmt("%.3f", worst) + " (bound 0.20)" +
                                      (failing.empty() ? "" : "; over the bound:" + failing)};
}

Outcome taming_falsifier() {
  const ModelSpec model = builtin_double_well(0.3, 10.0);
  const std::size_t particles = 100;
  const BrownianBundle bundle = generate(42, particles, model.m, model.m0, 8, 1.0);
  const ParticleEnsemble init = sample_initial_states(model, particles, 42);
  SchemeConfig config;
  config.steps = 8;
  config.kind = SchemeKind::UntamedEuler;
  bool blew_up = false;
  try {
    simulate(model, config, bundle, init);
  } catch (const BlowUpError&) {
    blew_up = true;
  }
  config.kind = SchemeKind::TamedEuler;
  bool tamed_finite = true;
  double m2 = 0.0;
  try {
    const auto out = simulate(model, config, bundle, init).final_state;
    m2 = empirical_moment(out, 2);
    tamed_finite = std::isfinite(m2) && std::isfinite(empirical_moment(out, 6));
  } catch (const BlowUpError&) {
    tamed_finite = false;
  }
  return {blew_up && tamed_finite, std::string("untamed ") + (blew_up ? "blew up" : "did NOT blow up") +
                                       ", tamed " + (tamed_finite ? "finite" : "NOT finite") +
                                       " (second moment " + fmt("%.4g", m2) + ")"};
}

Outcome growth_envelopes() {
  double worst = 0.0;
  bool pass = true;
  for (const auto& model : {builtin_three_halves(), builtin_double_well(), builtin_double_well_common(),
                            builtin_measure_coupled_diffusion()}) {
    for (std::size_t n : {std::size_t{8}, std::size_t{1024}}) {
      for (auto kind : {TamingKind::EulerHalf, TamingKind::MilsteinFull}) {
        const EnvelopeReport r = check_growth_envelope(model, n, kind, 10000);
        pass = pass && r.pass;
        worst = std::max(worst, r.fitted_k);
      }
    }
  }
  return {pass && worst < 1e3, "largest fitted K " + fmt("%.3f", worst) + " < 1e3"};
}

Outcome lambda_bar_oracle() {
  const std::size_t particles = 5, steps = 4;
  const std::vector<double> x{1.3, -0.4, 0.05, 2.1, -1.7};
  const ParticleEnsemble ens(particles, 1, x);
  double worst_oracle = 0.0, worst_step = 0.0;
  bool zero_exact = true;
  for (double c : {0.2, 0.0}) {
    const ModelSpec model = builtin_measure_coupled_diffusion(c, 1.0);
    const BrownianBundle bundle = generate(42, particles, 1, 1, steps, 1.0);
    SchemeConfig on;
    on.kind = SchemeKind::TamedMilstein;
    on.steps = steps;
    SchemeConfig off = on;
    off.measure_corrections = false;
    const oracle::CoupledWellStep ref{c, 1.0 / steps, static_cast<double>(steps)};
    for (std::size_t k = 0; k < steps; ++k) {
      const auto with = milstein_step(model, ens, bundle, k, on);
      const auto without = milstein_step(model, ens, bundle, k, off);
      const auto lib_bar = measure_correction(model, ens, bundle, k, on);
      std::vector<double> dw;
      for (std::size_t i = 0; i < particles; ++i) dw.push_back(bundle.increment(i, k)[0]);
      const auto bar = ref.lambda_bar(x, dw, bundle.common_increment(k)[0]);
      for (std::size_t i = 0; i < particles; ++i) {
        const double diff = with.states[i] - without.states[i];
        if (c == 0.0) {
          zero_exact = zero_exact && diff == 0.0 && lib_bar[i] == 0.0;
          continue;
        }
        worst_oracle = std::max(worst_oracle, std::abs(lib_bar[i] - bar[i]) / std::abs(bar[i]));
        // The on/off difference can only resolve the correction to the
        // spacing of doubles near the updated state.
        const double ulp = std::nextafter(std::abs(with.states[i]), INFINITY) - std::abs(with.states[i]);
        worst_step = std::max(worst_step, std::abs(diff - lib_bar[i]) / ulp);
      }
    }
  }
  return {worst_oracle < 1e-12 && worst_step <= 2.0 && zero_exact,
          "correction vs oracle max relative error " + fmt("%.3g", worst_oracle) +
              " < 1e-12, on-off step difference within " + fmt("%.1f", worst_step) + " ulp of it, c=0 " +
              (zero_exact ? "exactly zero" : "NOT zero")};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome coupling_and_determinism() {
  // Coarsening identity against an independent pairwise-sum oracle.
  const BrownianBundle finest = generate(42, 50, 2, 1, 512, 1.0);
  bool bitwise = true;
  BrownianBundle current = finest;
  std::vector<double> dw = finest.idiosyncratic(), dw0 = finest.common();
  std::size_t steps = 512;
  while (steps > 1) {
    const BrownianBundle next = coarsen(current);
    std::vector<double> ref_dw, ref_dw0;
    for (std::size_t i = 0; i < 50; ++i) {
      for (std::size_t k = 0; k < steps / 2; ++k) {
        for (std::size_t c = 0; c < 2; ++c) {
          ref_dw.push_back(dw[(i * steps + 2 * k) * 2 + c] + dw[(i * steps + 2 * k + 1) * 2 + c]);
        }
      }
    }
    for (std::size_t k = 0; k < steps / 2; ++k) ref_dw0.push_back(dw0[2 * k] + dw0[2 * k + 1]);
    bitwise = bitwise && next.idiosyncratic() == ref_dw && next.common() == ref_dw0;
    dw = ref_dw;
    dw0 = ref_dw0;
    steps /= 2;
    current = next;
  }

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mvsde_acceptance";
  fs::create_directories(dir);
  std::ofstream(dir / "study.cfg") << "[model]\nmodel = measure_coupled\n[scheme]\nkind = tamed_milstein\n"
                                      "[study]\nlevel_max = 7\nparticles = 200\nouter = 2\n";
  const std::string base = std::string(MVSDE_CLI_PATH) + " --config " + (dir / "study.cfg").string();
  const int s1 = std::system((base + " --threads 1 --out " + (dir / "t1.csv").string() + " > /dev/null").c_str());
  const int s8 = std::system((base + " --threads 8 --out " + (dir / "t8.csv").string() + " > /dev/null").c_str());
  const std::string a = read_file(dir / "t1.csv");
  const std::string b = read_file(dir / "t8.csv");
  const bool identical = s1 == 0 && s8 == 0 && !a.empty() && a == b;
  fs::remove_all(dir);
  return {bitwise && identical, std::string("coarsening ") + (bitwise ? "bitwise exact" : "NOT exact") +
                                    " on all 9 level pairs, study CSV " +
                                    (identical ? "byte-identical" : "DIFFERS") + " for 1 vs 8 threads"};
}

double brute_force_w2_sq(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<int> perm(b.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double cost = 0;
    for (std::size_t i = 0; i < a.size(); ++i) cost += (a[i] - b[perm[i]]) * (a[i] - b[perm[i]]);
    best = std::min(best, cost / static_cast<double>(a.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Outcome measure_identities() {
  double worst_delta = 0.0, worst_w2 = 0.0;
  for (std::uint32_t trial = 0; trial < 100; ++trial) {
    CounterStream rng(42, 0, StreamTag::Sampling, trial);
    std::vector<double> rows(30);
    for (auto& v : rows) v = 2.0 * rng.normal();
    OwnedEnsemble e{rows, 10, 3};
    double direct = 0.0;
    for (double v : rows) direct += v * v;
    direct /= 10.0;
    worst_delta = std::max(worst_delta, std::abs(w2_sq_to_delta0(e.view()) - direct) / direct);

    std::vector<double> a(5), b(5);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = 0.5 + 2.0 * rng.normal();
    const double w2 = w2_1d_exact(OwnedEnsemble::scalar(a).view(), OwnedEnsemble::scalar(b).view());
    const double ref = brute_force_w2_sq(a, b);
    worst_w2 = std::max(worst_w2, std::abs(w2 * w2 - ref) / ref);
  }
  // "Exact" up to the rounding of two differently ordered sums of 5 squares.
  return {worst_delta < 1e-14 && worst_w2 < 1e-13,
          "W2(mu, delta0)^2 relative error " + fmt("%.2g", worst_delta) + ", 1-d W2 vs 5! oracle " +
              fmt("%.2g", worst_w2) + " over 100 instances"};
}

Outcome chaos_monotone() {
  SchemeConfig scheme;
  scheme.kind = SchemeKind::TamedEuler;
  scheme.steps = 64;
  const auto points = chaos_trend(builtin_double_well(0.3, 1.0), scheme, {32, 128, 512}, 4096, 42, 20);
  bool monotone = true;
  std::string detail = "W2:";
  for (std::size_t i = 0; i < points.size(); ++i) {
    detail += " N=" + std::to_string(points[i].particles) + " " + fmt("%.4f", points[i].w2);
    if (i > 0 && points[i].w2 > points[i - 1].w2) monotone = false;
  }
  return {monotone, detail + (monotone ? " (non-increasing)" : " (NOT monotone)")};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {"tamed Euler rate, 3/2 model",
       [] { return rate_criterion(builtin_three_halves(), SchemeKind::TamedEuler, 9, 1000, 1, 0.35, 0.70); }},
      {"tamed Milstein rate, double well",
       [] {
         return rate_criterion(builtin_double_well(0.3, 1.0), SchemeKind::TamedMilstein, 9, 1000, 1, 0.80, 1.20);
       }},
      {"tamed Milstein rate, double well with common noise",
       [] {
         return rate_criterion(builtin_double_well_common(0.1, 1.0), SchemeKind::TamedMilstein, 8, 500, 20, 0.75,
                               1.25);
       }},
      {"moment stability", moment_stability},
      {"taming falsifier", taming_falsifier},
      {"growth envelopes", growth_envelopes},
      {"measure-derivative correction", lambda_bar_oracle},
      {"coupling and determinism", coupling_and_determinism},
      {"measure identities", measure_identities},
      {"propagation-of-chaos trend", chaos_monotone},
  };

  // With an argument, run only that criterion (1-based).
  std::size_t first = 0, last = criteria.size();
  if (argc > 1) {
    first = std::strtoul(argv[1], nullptr, 10) - 1;
    if (first >= criteria.size()) {
      std::fprintf(stderr, "criterion index must be 1..%zu\n", criteria.size());
      return 2;
    }
    last = first + 1;
  }

  int failures = 0;
  for (std::size_t i = first; i < last; ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += outcome.pass ? 0 : 1;
    std::printf("criterion %2zu %s: %s; %s [%.1fs]\n", i + 1, outcome.pass ? "PASS" : "FAIL", criteria[i].name,
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  if (last - first > 1) std::printf("%d of %zu criteria failed\n", failures, last - first);
  return failures == 0 ? 0 : 1;
}
