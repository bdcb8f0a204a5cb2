#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "xbar/config.hpp"
#include "xbar/io.hpp"
#include "xbar/version.hpp"

namespace xbar {

// =============================================================================
// Run orchestration
// =============================================================================
// A run starts by writing a manifest (resolved parameters, seed, config hash,
// tool version) plus the resolved config file, then dispatches on the
// experiment kind and writes the outputs. Feeding the resolved config back
// through --config regenerates every output byte-identically.

struct RunManifest {
  std::string config_path; ///< source path ("" for built-in defaults)
  ConfigMap resolved;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string version = kVersion;
  std::string hash;
};

inline nlohmann::json manifest_json(const RunManifest &m) {
  nlohmann::json j;
  j["config_path"] = m.config_path;
  j["config_hash"] = m.hash;
  j["seed"] = m.seed;
  j["out_dir"] = m.out_dir;
  j["version"] = m.version;
  nlohmann::json params;
  for (const auto &[key, value] : m.resolved) {
    params[key] = value;
  }
  j["resolved"] = params;
  return j;
}

/// Summary fields common to every run; kind-specific results are merged in.
inline nlohmann::json base_summary(const RunManifest &m, const ExperimentConfig &cfg) {
  nlohmann::json j;
  j["config_hash"] = m.hash;
  j["seed"] = m.seed;
  j["kind"] = to_string(cfg.kind);
  j["algorithm"] = to_string(cfg.optimizer.algorithm);
  j["version"] = m.version;
  return j;
}

/// Executes one resolved experiment and writes manifest, resolved config,
/// data CSVs and summary.json into out_dir.
inline void run_single(const ConfigMap &resolved, const std::string &config_path,
                       const std::filesystem::path &out_dir) {
  namespace fs = std::filesystem;
  const ExperimentConfig cfg = build_experiment_config(resolved);

  RunManifest manifest;
  manifest.config_path = config_path;
  manifest.resolved = resolved;
  manifest.seed = cfg.seed;
  manifest.out_dir = out_dir.string();
  manifest.hash = config_hash(resolved);
  fs::create_directories(out_dir);
  atomic_write_file(out_dir / "manifest.json", manifest_json(manifest).dump(2) + "\n");
  atomic_write_file(out_dir / "resolved.cfg", canonical_serialize(resolved));

  nlohmann::json summary = base_summary(manifest, cfg);
  switch (cfg.kind) {
  case ExperimentKind::TraceConstantGradient:
  case ExperimentKind::TraceDecay: {
    const TraceResult result = run_trace_experiment(cfg);
    atomic_write_file(out_dir / "trace.csv", trace_csv(result));
    summary["w_pulses_total"] = result.w_pulses_total;
    summary["w_pulses_before_switch"] = result.w_pulses_before_switch;
    summary["w_pulses_after_switch"] = result.w_pulses_after_switch;
    summary["steps"] = cfg.steps;
    break;
  }
  case ExperimentKind::DeviceTraces: {
    const Matrix traj = run_device_traces(cfg.device_a, cfg.devices, cfg.seed);
    atomic_write_file(out_dir / "device_traces.csv", device_traces_csv(traj));
    SeedSplitter seeds(cfg.seed);
    RngStream rng = seeds.stream("device_a");
    DeviceArray sample(cfg.rows, cfg.cols, cfg.device_a, rng);
    atomic_write_file(out_dir / "array_state.csv", array_state_csv(sample));
    summary["n_devices"] = cfg.devices.n_devices;
    summary["pulses"] = traj.rows() - 1;
    break;
  }
  case ExperimentKind::WeightProgramming: {
    const WeightProgramResult result = run_weight_programming(cfg);
    atomic_write_file(out_dir / "eps_curve.csv", eps_curve_csv(result, cfg.program.target_std));
    summary["eps_w_abs"] = result.final_eps_abs;
    summary["eps_w_rel"] = result.final_eps_rel;
    summary["w_pulses_total"] = result.w_pulses_total;
    summary["repeats"] = result.repeats;
    summary["steps"] = cfg.steps;
    break;
  }
  }
  atomic_write_file(out_dir / "summary.json", summary.dump(2) + "\n");
}

/// One expanded sweep point: resolved config plus its axis assignments.
struct SweepPoint {
  ConfigMap resolved;
  ConfigMap assignment;
  std::string label;
};

inline std::string sanitize_label_component(const std::string &s) {
  std::string out;
  for (char c : s) {
    out += (std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '.') ? c : '_';
  }
  return out;
}

/// Cartesian expansion of the sweep axes over a base config. The last axis
/// varies fastest; point labels carry the index and the assignments.
inline std::vector<SweepPoint> expand_sweep(const ConfigMap &file_map, const ConfigMap &overrides,
                                            const std::vector<SweepAxis> &axes) {
  std::size_t total = 1;
  for (const SweepAxis &axis : axes) {
    total *= axis.values.size();
  }
  std::vector<SweepPoint> points;
  points.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    SweepPoint point;
    std::size_t rest = idx;
    for (std::size_t ax = axes.size(); ax-- > 0;) {
      const SweepAxis &axis = axes[ax];
      const std::size_t vi = rest % axis.values.size();
      rest /= axis.values.size();
      point.assignment[axis.key] = axis.values[vi];
    }
    ConfigMap merged = overrides;
    for (const auto &[key, value] : point.assignment) {
      merged[key] = value; // sweep assignment wins over base and flags
    }
    point.resolved = resolve_config(file_map, merged);
    char index_buf[16];
    std::snprintf(index_buf, sizeof(index_buf), "point_%03zu", idx);
    point.label = index_buf;
    for (const auto &[key, value] : point.assignment) {
      const std::string short_key = key.substr(key.rfind('.') + 1);
      point.label += "_" + sanitize_label_component(short_key) + "=" +
                     sanitize_label_component(value);
    }
    points.push_back(std::move(point));
  }
  return points;
}

/// Runs all sweep points (optionally in parallel worker threads; each point
/// owns its output directory) and writes an aggregate sweep_summary.json.
inline void run_sweep(const ConfigMap &file_map, const ConfigMap &overrides,
                      const std::vector<SweepAxis> &axes, const std::string &config_path,
                      const std::filesystem::path &out_dir, int jobs) {
  namespace fs = std::filesystem;
  const std::vector<SweepPoint> points = expand_sweep(file_map, overrides, axes);
  fs::create_directories(out_dir);

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(points.size());
  auto worker = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= points.size()) {
        return;
      }
      try {
        run_single(points[idx].resolved, config_path, out_dir / points[idx].label);
      } catch (const std::exception &e) {
        errors[idx] = e.what();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) {
      pool.emplace_back(worker);
    }
    for (std::thread &t : pool) {
      t.join();
    }
  }
  for (std::size_t idx = 0; idx < points.size(); ++idx) {
    if (!errors[idx].empty()) {
      throw std::runtime_error("sweep point '" + points[idx].label + "' failed: " + errors[idx]);
    }
  }

  nlohmann::json records = nlohmann::json::array();
  for (const SweepPoint &point : points) {
    nlohmann::json rec;
    rec["point"] = point.label;
    nlohmann::json assignment;
    for (const auto &[key, value] : point.assignment) {
      assignment[key] = value;
    }
    rec["assignment"] = assignment;
    rec["summary"] = nlohmann::json::parse(read_file(out_dir / point.label / "summary.json"));
    records.push_back(rec);
  }
  nlohmann::json aggregate;
  aggregate["points"] = records;
  aggregate["version"] = kVersion;
  atomic_write_file(out_dir / "sweep_summary.json", aggregate.dump(2) + "\n");
}

} // namespace xbar
