#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbar/experiment.hpp"

namespace xbar {

// =============================================================================
// Experiment configuration files
// =============================================================================
// Flat "key.path = value" text with full-line # comments. Parsing is strict:
// unknown keys, duplicate keys and invariant violations are errors naming the
// offending key.
//
// `sweep.<key> = v1, v2, ...` entries declare sweep axes; everything else is
// a scalar. The resolved configuration always contains every known key, so
// its hash pins the complete parameter set of a run.

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using ConfigMap = std::map<std::string, std::string>;

namespace cfgdetail {

inline std::string trim(const std::string &s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) {
    return "";
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace cfgdetail

inline ConfigMap parse_config_text(const std::string &text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = cfgdetail::trim(line);
    if (stripped.empty() || stripped[0] == '#') {
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = cfgdetail::trim(stripped.substr(0, eq));
    const std::string value = cfgdetail::trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    if (value.empty()) {
      throw ConfigError("config key '" + key + "': empty value");
    }
    if (map.count(key) != 0) {
      throw ConfigError("config key '" + key + "': duplicate assignment");
    }
    map[key] = value;
  }
  return map;
}

inline ConfigMap parse_config_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

namespace cfgdetail {

inline double to_double(const std::string &key, const std::string &value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) {
      throw std::invalid_argument("");
    }
    return v;
  } catch (const std::exception &) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

inline long to_long(const std::string &key, const std::string &value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) {
      throw std::invalid_argument("");
    }
    return v;
  } catch (const std::exception &) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
}

inline std::uint64_t to_u64(const std::string &key, const std::string &value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) {
      throw std::invalid_argument("");
    }
    return v;
  } catch (const std::exception &) {
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + value +
                      "'");
  }
}

inline bool to_bool(const std::string &key, const std::string &value) {
  if (value == "true") {
    return true;
  }
  if (value == "false") {
    return false;
  }
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

inline void set_device_defaults(ConfigMap &map, const std::string &prefix) {
  map[prefix + ".dw_min"] = "0.05";
  map[prefix + ".sigma_b"] = "0.3";
  map[prefix + ".sigma_ctoc"] = "0.3";
  map[prefix + ".sigma_dtod"] = "0.3";
  map[prefix + ".sigma_updown"] = "0.3";
}

} // namespace cfgdetail

/// Full default parameter set for an experiment kind. Scalar values follow
/// the constant-gradient trace setup (dw_min 0.05, all device sigmas 0.3,
/// gamma0 200, lambda 0.1, n_s 1, beta 0.5, rho 0.1, l_max 5, eta 1); the
/// weight-programming kind additionally enables the dynamic eta scaling and
/// uses a 20x20 tile.
inline ConfigMap default_config(ExperimentKind kind) {
  ConfigMap map;
  map["kind"] = to_string(kind);
  map["seed"] = "1";
  map["steps"] = "1000";
  map["switch_step"] = "500";
  map["alpha"] = "0.5";
  map["input_noise_scale"] = "1.0";
  map["dims.m"] = "10";
  map["dims.n"] = "10";
  cfgdetail::set_device_defaults(map, "device");
  cfgdetail::set_device_defaults(map, "device_w");
  map["reference.mu_r"] = "0";
  map["reference.sigma_r"] = "0";
  map["optimizer.algorithm"] = "tt3";
  map["optimizer.lambda"] = "0.1";
  map["optimizer.gamma0"] = "200";
  map["optimizer.n_s"] = "1";
  map["optimizer.rho"] = "0.1";
  map["optimizer.beta"] = "0.5";
  map["optimizer.eta0"] = "1";
  map["optimizer.l_max"] = "5";
  map["optimizer.ema_coeff"] = "0.9";
  map["optimizer.dynamic_eta"] = "false";
  map["optimizer.correct_w_sp"] = "false";
  map["optimizer.paper_verbatim_coeffs"] = "false";
  map["optimizer.paper_verbatim_chopper"] = "false";
  map["optimizer.chopper_deterministic"] = "false";
  map["mvm.out_noise"] = "0";
  map["mvm.in_bits"] = "0";
  map["mvm.out_bits"] = "0";
  map["mvm.out_bound"] = "20";
  map["trace.row"] = "0";
  map["trace.col"] = "0";
  map["devices.n_devices"] = "20";
  map["devices.up_pulses"] = "20";
  map["devices.down_pulses"] = "20";
  map["devices.repeats"] = "2";
  map["devices.start_w"] = "0";
  map["program.repeats"] = "3";
  map["program.eval_every"] = "50";
  map["program.target_std"] = "0.3";
  map["program.init_w_to_target"] = "false";
  if (kind == ExperimentKind::WeightProgramming) {
    map["dims.m"] = "20";
    map["dims.n"] = "20";
    map["steps"] = "20000";
    map["optimizer.dynamic_eta"] = "true";
    // W must be able to hold the target weights; A keeps full variability
    map["device_w.sigma_b"] = "0";
  }
  return map;
}

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

/// Removes sweep.* entries from the map and returns them as axes (key order,
/// values in listed order).
inline std::vector<SweepAxis> extract_sweep_axes(ConfigMap &map) {
  std::vector<SweepAxis> axes;
  for (auto it = map.begin(); it != map.end();) {
    if (it->first.rfind("sweep.", 0) == 0) {
      SweepAxis axis;
      axis.key = it->first.substr(6);
      std::istringstream values(it->second);
      std::string item;
      while (std::getline(values, item, ',')) {
        const std::string v = cfgdetail::trim(item);
        if (v.empty()) {
          throw ConfigError("config key '" + it->first + "': empty sweep value");
        }
        axis.values.push_back(v);
      }
      if (axis.values.empty()) {
        throw ConfigError("config key '" + it->first + "': empty sweep list");
      }
      axes.push_back(std::move(axis));
      it = map.erase(it);
    } else {
      ++it;
    }
  }
  return axes;
}

/// Overlays file values and overrides onto the defaults of the requested
/// kind. Unknown keys are errors. The n_states aliases are normalized into
/// dw_min, and device_w.* inherits any device.* setting not explicitly
/// overridden.
inline ConfigMap resolve_config(const ConfigMap &file_map, const ConfigMap &overrides) {
  ConfigMap merged = file_map;
  for (const auto &[key, value] : overrides) {
    merged[key] = value; // command-line overrides win
  }
  const auto kind_it = merged.find("kind");
  if (kind_it == merged.end()) {
    throw ConfigError("config key 'kind' is required");
  }
  const ExperimentKind kind = experiment_kind_from_string(kind_it->second);
  ConfigMap resolved = default_config(kind);

  // device_w inherits device settings unless set explicitly
  for (const char *field :
       {"dw_min", "n_states", "sigma_b", "sigma_ctoc", "sigma_dtod", "sigma_updown"}) {
    const std::string a_key = std::string("device.") + field;
    const std::string w_key = std::string("device_w.") + field;
    if (merged.count(a_key) != 0 && merged.count(w_key) == 0) {
      merged[w_key] = merged.at(a_key);
    }
  }

  for (const auto &[key, value] : merged) {
    if (key == "device.n_states" || key == "device_w.n_states") {
      const std::string dw_key = key.substr(0, key.find('.')) + ".dw_min";
      if (merged.count(dw_key) != 0) {
        throw ConfigError("config key '" + key + "': conflicts with '" + dw_key + "'");
      }
      const double n_states = cfgdetail::to_double(key, value);
      if (!(n_states > 0.0)) {
        throw ConfigError("config key '" + key + "': must be > 0");
      }
      resolved[dw_key] = cfgdetail::format_double(2.0 / n_states);
      continue;
    }
    if (resolved.count(key) == 0) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    resolved[key] = value;
  }
  return resolved;
}

/// Typed view of a resolved map; throws ConfigError naming the key on any
/// malformed value, and converts invariant violations into ConfigError.
inline ExperimentConfig build_experiment_config(const ConfigMap &resolved) {
  using namespace cfgdetail;
  auto get = [&](const char *key) -> const std::string & {
    const auto it = resolved.find(key);
    if (it == resolved.end()) {
      throw ConfigError(std::string("config key '") + key + "' missing from resolved map");
    }
    return it->second;
  };
  ExperimentConfig cfg;
  cfg.kind = experiment_kind_from_string(get("kind"));
  cfg.seed = to_u64("seed", get("seed"));
  cfg.steps = to_long("steps", get("steps"));
  cfg.switch_step = to_long("switch_step", get("switch_step"));
  cfg.alpha = to_double("alpha", get("alpha"));
  cfg.input_noise_scale = to_double("input_noise_scale", get("input_noise_scale"));
  cfg.rows = static_cast<int>(to_long("dims.m", get("dims.m")));
  cfg.cols = static_cast<int>(to_long("dims.n", get("dims.n")));

  auto device = [&](const std::string &prefix) {
    DeviceParams p;
    p.dw_min = to_double(prefix + ".dw_min", get((prefix + ".dw_min").c_str()));
    p.sigma_b = to_double(prefix + ".sigma_b", get((prefix + ".sigma_b").c_str()));
    p.sigma_ctoc = to_double(prefix + ".sigma_ctoc", get((prefix + ".sigma_ctoc").c_str()));
    p.sigma_dtod = to_double(prefix + ".sigma_dtod", get((prefix + ".sigma_dtod").c_str()));
    p.sigma_updown = to_double(prefix + ".sigma_updown", get((prefix + ".sigma_updown").c_str()));
    return p;
  };
  cfg.device_a = device("device");
  cfg.device_w = device("device_w");

  cfg.reference.mu_r = to_double("reference.mu_r", get("reference.mu_r"));
  cfg.reference.sigma_r = to_double("reference.sigma_r", get("reference.sigma_r"));

  try {
    cfg.optimizer.algorithm = algorithm_from_string(get("optimizer.algorithm"));
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("config key 'optimizer.algorithm': ") + e.what());
  }
  cfg.optimizer.lambda = to_double("optimizer.lambda", get("optimizer.lambda"));
  cfg.optimizer.gamma0 = to_double("optimizer.gamma0", get("optimizer.gamma0"));
  cfg.optimizer.n_s = static_cast<int>(to_long("optimizer.n_s", get("optimizer.n_s")));
  cfg.optimizer.rho = to_double("optimizer.rho", get("optimizer.rho"));
  cfg.optimizer.beta = to_double("optimizer.beta", get("optimizer.beta"));
  cfg.optimizer.eta0 = to_double("optimizer.eta0", get("optimizer.eta0"));
  cfg.optimizer.l_max = static_cast<int>(to_long("optimizer.l_max", get("optimizer.l_max")));
  cfg.optimizer.ema_coeff = to_double("optimizer.ema_coeff", get("optimizer.ema_coeff"));
  cfg.optimizer.dynamic_eta = to_bool("optimizer.dynamic_eta", get("optimizer.dynamic_eta"));
  cfg.optimizer.correct_w_sp = to_bool("optimizer.correct_w_sp", get("optimizer.correct_w_sp"));
  cfg.optimizer.paper_verbatim_coeffs =
      to_bool("optimizer.paper_verbatim_coeffs", get("optimizer.paper_verbatim_coeffs"));
  cfg.optimizer.paper_verbatim_chopper =
      to_bool("optimizer.paper_verbatim_chopper", get("optimizer.paper_verbatim_chopper"));
  cfg.optimizer.chopper_deterministic =
      to_bool("optimizer.chopper_deterministic", get("optimizer.chopper_deterministic"));

  cfg.mvm.out_noise = to_double("mvm.out_noise", get("mvm.out_noise"));
  cfg.mvm.in_bits = static_cast<int>(to_long("mvm.in_bits", get("mvm.in_bits")));
  cfg.mvm.out_bits = static_cast<int>(to_long("mvm.out_bits", get("mvm.out_bits")));
  cfg.mvm.out_bound = to_double("mvm.out_bound", get("mvm.out_bound"));

  cfg.trace.row = static_cast<int>(to_long("trace.row", get("trace.row")));
  cfg.trace.col = static_cast<int>(to_long("trace.col", get("trace.col")));

  cfg.devices.n_devices = static_cast<int>(to_long("devices.n_devices", get("devices.n_devices")));
  cfg.devices.up_pulses = static_cast<int>(to_long("devices.up_pulses", get("devices.up_pulses")));
  cfg.devices.down_pulses =
      static_cast<int>(to_long("devices.down_pulses", get("devices.down_pulses")));
  cfg.devices.repeats = static_cast<int>(to_long("devices.repeats", get("devices.repeats")));
  cfg.devices.start_w = to_double("devices.start_w", get("devices.start_w"));

  cfg.program.repeats = static_cast<int>(to_long("program.repeats", get("program.repeats")));
  cfg.program.eval_every =
      static_cast<int>(to_long("program.eval_every", get("program.eval_every")));
  cfg.program.target_std = to_double("program.target_std", get("program.target_std"));
  cfg.program.init_w_to_target =
      to_bool("program.init_w_to_target", get("program.init_w_to_target"));

  try {
    cfg.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("config invariant violated: ") + e.what());
  }
  return cfg;
}

/// Canonical one-key-per-line serialization (sorted keys, normalized
/// numeric formatting) used for hashing and the resolved-config output.
inline std::string canonical_serialize(const ConfigMap &resolved) {
  std::ostringstream out;
  for (const auto &[key, value] : resolved) {
    std::string normalized = value;
    // normalize numeric literals so equivalent spellings hash identically
    try {
      std::size_t pos = 0;
      const double v = std::stod(value, &pos);
      if (pos == value.size()) {
        normalized = cfgdetail::format_double(v);
      }
    } catch (const std::exception &) {
      // non-numeric value, keep as-is
    }
    out << key << " = " << normalized << "\n";
  }
  return out.str();
}

inline std::string config_hash(const ConfigMap &resolved) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_serialize(resolved))));
  return buf;
}

} // namespace xbar
