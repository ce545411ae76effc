#include "mvsde/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace mvsde {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool is_snake_case(const std::string& key) {
  if (key.empty() || !std::islower(static_cast<unsigned char>(key.front()))) return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_';
  });
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  return items;
}

double parse_double(const std::string& key, const std::string& text) {
  double out = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end || text.empty()) throw ConfigError(key, "expected a number, got '" + text + "'");
  return out;
}

long long parse_integer(const std::string& key, const std::string& text) {
  long long out = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  }
  return out;
}

std::size_t parse_positive(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v <= 0) throw ConfigError(key, "must be a positive integer, got '" + text + "'");
  return static_cast<std::size_t>(v);
}

std::size_t parse_non_negative(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v < 0) throw ConfigError(key, "must be a non-negative integer, got '" + text + "'");
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

using Handler = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, std::map<std::string, Handler>>& handlers() {
  static const std::map<std::string, std::map<std::string, Handler>> table = {
      {"run",
       {
           {"command",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              static const std::map<std::string, Command> names = {{"simulate", Command::Simulate},
                                                                   {"study", Command::Study},
                                                                   {"chaos", Command::Chaos},
                                                                   {"moments", Command::Moments},
                                                                   {"audit", Command::Audit}};
              const auto it = names.find(v);
              if (it == names.end()) throw ConfigError(k, "unknown command '" + v + "'");
              c.command = it->second;
            }},
           {"seed",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              std::uint64_t seed = 0;
              const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), seed);
              if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
                throw ConfigError(k, "expected an unsigned 64-bit integer, got '" + v + "'");
              }
              c.seed = seed;
            }},
           {"output", [](RunConfig& c, const std::string&, const std::string& v) { c.output = v; }},
           {"threads",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.threads = static_cast<int>(parse_non_negative(k, v));
            }},
       }},
      {"scheme",
       {
           {"kind",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "tamed_euler") c.scheme.kind = SchemeKind::TamedEuler;
              else if (v == "tamed_milstein") c.scheme.kind = SchemeKind::TamedMilstein;
              else if (v == "untamed_euler") c.scheme.kind = SchemeKind::UntamedEuler;
              else throw ConfigError(k, "unknown scheme '" + v + "'");
            }},
           {"n", [](RunConfig& c, const std::string& k, const std::string& v) { c.scheme.steps = parse_positive(k, v); }},
           {"horizon",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              const double t = parse_double(k, v);
              if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError(k, "must be a positive number");
              c.scheme.horizon = t;
            }},
           {"double_integral",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "commutative") {
                c.scheme.di_mode.kind = DoubleIntegralMode::Kind::CommutativeClosedForm;
              } else if (v == "substep") {
                c.scheme.di_mode.kind = DoubleIntegralMode::Kind::SubstepApprox;
                if (c.scheme.di_mode.substeps == 0) c.scheme.di_mode.substeps = 16;
              } else {
                throw ConfigError(k, "expected commutative or substep, got '" + v + "'");
              }
            }},
           {"substeps",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              const auto m = parse_positive(k, v);
              if (m < 2) throw ConfigError(k, "needs at least 2 substeps");
              c.scheme.di_mode.substeps = static_cast<int>(m);
            }},
           {"measure_corrections",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.scheme.measure_corrections = parse_bool(k, v);
            }},
       }},
      {"study",
       {
           {"level_min",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.level_min = static_cast<int>(parse_positive(k, v));
            }},
           {"level_max",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.level_max = static_cast<int>(parse_positive(k, v));
            }},
           {"particles", [](RunConfig& c, const std::string& k, const std::string& v) { c.particles = parse_positive(k, v); }},
           {"p_values",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.p_values.clear();
              for (const auto& item : split_list(v)) {
                const auto p = parse_positive(k, item);
                if (p % 2 != 0) throw ConfigError(k, "p values must be even, got " + item);
                c.p_values.push_back(static_cast<int>(p));
              }
            }},
           {"outer", [](RunConfig& c, const std::string& k, const std::string& v) { c.outer = parse_positive(k, v); }},
           {"sizes",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.sizes.clear();
              for (const auto& item : split_list(v)) c.sizes.push_back(parse_positive(k, item));
            }},
           {"reference_particles",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.reference_particles = parse_positive(k, v); }},
           {"repeats", [](RunConfig& c, const std::string& k, const std::string& v) { c.repeats = parse_positive(k, v); }},
           {"noise_steps",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.noise_steps = parse_non_negative(k, v); }},
           {"samples", [](RunConfig& c, const std::string& k, const std::string& v) { c.samples = parse_positive(k, v); }},
           {"radius",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              const double r = parse_double(k, v);
              if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError(k, "must be a positive number");
              c.radius = r;
            }},
       }},
  };
  return table;
}

void validate(const RunConfig& c) {
  if (c.model_id.empty()) throw ConfigError("model.model", "a model id is required");
  if (c.level_max < c.level_min) throw ConfigError("study.level_max", "must be >= level_min");
  if (c.level_max > 30) throw ConfigError("study.level_max", "must be <= 30");
  for (std::size_t n : c.sizes) {
    if (n > c.reference_particles) throw ConfigError("study.sizes", "every size must be <= reference_particles");
  }
  if (c.noise_steps != 0) {
    const std::size_t ratio = c.noise_steps / c.scheme.steps;
    if (c.noise_steps % c.scheme.steps != 0 || (ratio & (ratio - 1)) != 0) {
      throw ConfigError("study.noise_steps", "must be n times a power of two");
    }
  }
  try {
    (void)c.build_model();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
}

}  // namespace

ModelSpec RunConfig::build_model() const { return make_builtin(model_id, model_params); }

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && handlers().find(section) == handlers().end()) {
        throw ConfigError("", "line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(key, "key appears before any [section]");
    const std::string qualified = section + "." + key;
    if (!is_snake_case(key)) throw ConfigError(qualified, "keys must be lower_snake_case");
    if (!seen.insert(qualified).second) throw ConfigError(qualified, "duplicate key");

    if (section == "model") {
      if (key == "model") {
        config.model_id = value;
        continue;
      }
      std::vector<double> numbers;
      for (const auto& item : split_list(value)) numbers.push_back(parse_double(qualified, item));
      config.model_params[key] = std::move(numbers);
      continue;
    }
    const auto& table = handlers().at(section);
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(qualified, "unknown key");
    it->second(config, key, value);
  }

  if (!config.model_id.empty()) {
    std::vector<std::string> allowed;
    try {
      allowed = builtin_parameter_names(config.model_id);
    } catch (const std::invalid_argument&) {
      throw ConfigError("model.model", "unknown model id '" + config.model_id + "'");
    }
    for (const auto& [key, value] : config.model_params) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ConfigError("model." + key, "not a parameter of model '" + config.model_id + "'");
      }
    }
  }
  validate(config);
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("", "cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << file.rdbuf();
  return parse_config(buffer.str());
}

const char* command_name(Command command) {
  switch (command) {
    case Command::Simulate: return "simulate";
    case Command::Study: return "study";
    case Command::Chaos: return "chaos";
    case Command::Moments: return "moments";
    case Command::Audit: return "audit";
  }
  return "?";
}

const char* scheme_name(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::TamedEuler: return "tamed_euler";
    case SchemeKind::TamedMilstein: return "tamed_milstein";
    case SchemeKind::UntamedEuler: return "untamed_euler";
  }
  return "?";
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace mvsde
