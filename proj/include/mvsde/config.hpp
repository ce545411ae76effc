#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/model.hpp"
#include "mvsde/scheme.hpp"

namespace mvsde {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class Command { Simulate, Study, Chaos, Moments, Audit };

/// A validated batch run. Grammar (one item per line):
///
///   # comment
///   [run]     command, seed, output, threads
///   [model]   model, then the model's parameters (e.g. sigma, x0)
///   [scheme]  kind, n, horizon, double_integral, substeps, measure_corrections
///   [study]   level_min, level_max, particles, p_values, outer, sizes,
///             reference_particles, repeats, noise_steps, samples, radius
///
/// Lists are comma separated; booleans are `true` / `false`.
struct RunConfig {
  Command command = Command::Study;
  std::string model_id;
  std::map<std::string, std::vector<double>> model_params;
  SchemeConfig scheme;

  int level_min = 3;
  int level_max = 9;
  std::size_t particles = 1000;
  std::vector<int> p_values{2, 4, 6};
  std::size_t outer = 1;

  std::vector<std::size_t> sizes{32, 128, 512};
  std::size_t reference_particles = 4096;
  std::size_t repeats = 20;

  std::size_t noise_steps = 0;

  std::size_t samples = 10000;
  double radius = 10.0;

  std::uint64_t seed = 42;
  std::string output;
  int threads = 0;

  ModelSpec build_model() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

const char* command_name(Command command);
const char* scheme_name(SchemeKind kind);

/// Exit statuses of `run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitBlowUp = 2;

/// Executes the command, writing CSV rows to `csv` and human-readable
/// summary lines (slopes, blow-up reports) to `summary`.
int run(const RunConfig& config, std::ostream& csv, std::ostream& summary);

/// As above, writing CSV to config.output (stdout when empty).
int run(const RunConfig& config);

/// Sets the worker count for data-parallel loops; 0 selects the default.
void set_worker_threads(int threads);

/// 17 significant digits, the CSV float format.
std::string format_double(double value);

}  // namespace mvsde
