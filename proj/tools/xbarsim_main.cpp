// xbarsim — crossbar in-memory training simulator CLI.
//
// Subcommands:
//   trace            mechanistic trace of one selected element
//   devices          raw device response traces under a pulse pattern
//   program-weights  single-layer weight-programming benchmark
//   sweep            cartesian parameter sweeps of any experiment kind
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xbar/xbar.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::string algorithm;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
};

void add_common_options(CLI::App *cmd, CommonArgs &args) {
  cmd->add_option("--config", args.config_path, "experiment config file");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--algorithm", args.algorithm, "optimizer algorithm override");
  cmd->add_option("--set", args.sets, "config override key=value (repeatable)")
      ->take_all();
  cmd->add_option("--seed", args.seed, "master seed override")
      ->each([&args](const std::string &) { args.seed_given = true; });
  cmd->add_option("--jobs", args.jobs, "parallel sweep workers")->check(CLI::PositiveNumber);
}

xbar::ConfigMap collect_overrides(const CommonArgs &args) {
  xbar::ConfigMap overrides;
  for (const std::string &entry : args.sets) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= entry.size()) {
      throw xbar::ConfigError("--set expects key=value, got '" + entry + "'");
    }
    overrides[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  if (!args.algorithm.empty()) {
    overrides["optimizer.algorithm"] = args.algorithm;
  }
  if (args.seed_given) {
    overrides["seed"] = std::to_string(args.seed);
  }
  return overrides;
}

// kinds each subcommand accepts; the first is its default
std::vector<std::string> allowed_kinds(const std::string &subcommand) {
  if (subcommand == "trace") {
    return {"trace_constant_gradient", "trace_decay"};
  }
  if (subcommand == "devices") {
    return {"device_traces"};
  }
  if (subcommand == "program-weights") {
    return {"weight_programming"};
  }
  return {};
}

int run_subcommand(const std::string &name, const CommonArgs &args) {
  xbar::ConfigMap file_map;
  if (!args.config_path.empty()) {
    file_map = xbar::parse_config_file(args.config_path);
  }
  xbar::ConfigMap overrides = collect_overrides(args);
  std::vector<xbar::SweepAxis> axes = xbar::extract_sweep_axes(file_map);

  if (name == "sweep") {
    if (axes.empty()) {
      throw xbar::ConfigError("sweep: config declares no sweep.* axes");
    }
    if (file_map.count("kind") == 0 && overrides.count("kind") == 0) {
      throw xbar::ConfigError("sweep: config key 'kind' is required");
    }
    xbar::run_sweep(file_map, overrides, axes, args.config_path, args.out_dir, args.jobs);
    return 0;
  }

  if (!axes.empty()) {
    throw xbar::ConfigError("sweep.* keys require the sweep subcommand");
  }
  const std::vector<std::string> kinds = allowed_kinds(name);
  if (file_map.count("kind") == 0 && overrides.count("kind") == 0) {
    overrides["kind"] = kinds.front();
  }
  const xbar::ConfigMap resolved = xbar::resolve_config(file_map, overrides);
  const std::string &kind = resolved.at("kind");
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    throw xbar::ConfigError("subcommand '" + name + "' cannot run kind '" + kind + "'");
  }
  xbar::run_single(resolved, args.config_path, args.out_dir);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"xbarsim: in-memory crossbar training simulator"};
  app.set_version_flag("--version", std::string("xbarsim ") + xbar::kVersion);
  app.require_subcommand(1);

  CommonArgs args;
  const char *names[] = {"trace", "devices", "program-weights", "sweep"};
  const char *descriptions[] = {
      "run a mechanistic trace experiment and emit trace.csv",
      "emit device response traces and sampled array state",
      "run the weight-programming benchmark and emit eps_curve.csv",
      "expand sweep.* axes and run every point",
  };
  for (int i = 0; i < 4; ++i) {
    add_common_options(app.add_subcommand(names[i], descriptions[i]), args);
  }

  CLI11_PARSE(app, argc, argv);

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    return run_subcommand(sub, args);
  } catch (const xbar::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
