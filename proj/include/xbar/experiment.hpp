#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbar/optimizer.hpp"

namespace xbar {

// =============================================================================
// Experiment harness
// =============================================================================
// Mechanistic trace studies (constant-gradient and gradient-switch-off),
// raw device response traces, and the single-layer weight-programming
// benchmark with the eps_w error metric.

enum class ExperimentKind { TraceConstantGradient, TraceDecay, DeviceTraces, WeightProgramming };

inline const char *to_string(ExperimentKind k) {
  switch (k) {
  case ExperimentKind::TraceConstantGradient:
    return "trace_constant_gradient";
  case ExperimentKind::TraceDecay:
    return "trace_decay";
  case ExperimentKind::DeviceTraces:
    return "device_traces";
  case ExperimentKind::WeightProgramming:
    return "weight_programming";
  }
  return "?";
}

inline ExperimentKind experiment_kind_from_string(const std::string &name) {
  if (name == "trace_constant_gradient") {
    return ExperimentKind::TraceConstantGradient;
  }
  if (name == "trace_decay") {
    return ExperimentKind::TraceDecay;
  }
  if (name == "device_traces") {
    return ExperimentKind::DeviceTraces;
  }
  if (name == "weight_programming") {
    return ExperimentKind::WeightProgramming;
  }
  throw std::invalid_argument("unknown experiment kind '" + name + "'");
}

/// Residual offset model of the reference programming step.
struct ReferenceConfig {
  double mu_r = 0.0;
  double sigma_r = 0.0;

  void validate() const {
    if (sigma_r < 0.0) {
      throw std::invalid_argument("reference.sigma_r must be >= 0");
    }
  }
};

struct TraceSelection {
  int row = 0;
  int col = 0;
};

struct DeviceTraceOptions {
  int n_devices = 20;
  int up_pulses = 20;
  int down_pulses = 20;
  int repeats = 2;
  double start_w = 0.0;
};

struct WeightProgramOptions {
  int repeats = 3;        ///< independent pulsing runs averaged per result
  int eval_every = 50;    ///< steps between eps_w evaluations
  double target_std = 0.3; ///< std of the random target weights
  bool init_w_to_target = false;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::TraceConstantGradient;
  DeviceParams device_a; ///< material of the gradient array A
  DeviceParams device_w; ///< material of the weight array W
  ReferenceConfig reference;
  OptimizerConfig optimizer;
  MvmConfig mvm;
  int rows = 10;
  int cols = 10;
  long steps = 1000;
  long switch_step = 500;        ///< trace_decay: step at which gradients stop
  double alpha = 0.5;            ///< gradient-activation correlation
  double input_noise_scale = 1.0; ///< trace_decay: gradient noise after the switch
  std::uint64_t seed = 1;
  TraceSelection trace;
  DeviceTraceOptions devices;
  WeightProgramOptions program;

  void validate() const {
    device_a.validate();
    device_w.validate();
    reference.validate();
    optimizer.validate();
    mvm.validate();
    if (rows < 1 || cols < 1) {
      throw std::invalid_argument("dims must be >= 1");
    }
    if (steps < 0) {
      throw std::invalid_argument("steps must be >= 0");
    }
    if (alpha < 0.0 || alpha > 1.0) {
      throw std::invalid_argument("alpha must be in [0, 1]");
    }
    if (input_noise_scale < 0.0) {
      throw std::invalid_argument("input_noise_scale must be >= 0");
    }
    const bool is_trace =
        kind == ExperimentKind::TraceConstantGradient || kind == ExperimentKind::TraceDecay;
    if (is_trace && rows != cols) {
      throw std::invalid_argument("trace experiments require square dims (d couples to x)");
    }
    if (is_trace && (trace.row < 0 || trace.row >= rows || trace.col < 0 || trace.col >= cols)) {
      throw std::invalid_argument("trace element out of range");
    }
    if (kind == ExperimentKind::TraceDecay && (switch_step < 0 || switch_step > steps)) {
      throw std::invalid_argument("switch_step must be in [0, steps]");
    }
    if (kind == ExperimentKind::DeviceTraces) {
      if (devices.n_devices < 1 || devices.repeats < 1 || devices.up_pulses < 0 ||
          devices.down_pulses < 0) {
        throw std::invalid_argument("devices block: counts must be positive");
      }
    }
    if (kind == ExperimentKind::WeightProgramming) {
      if (program.repeats < 1 || program.eval_every < 1 || !(program.target_std > 0.0)) {
        throw std::invalid_argument("program block: invalid repeat/eval/target settings");
      }
    }
  }
};

/// Per-step log of one selected element.
struct TraceRecord {
  long step = 0;
  double a_sel = 0.0;
  double ref_sel = 0.0; ///< r_ik for tt2/tt3, mu_past_ik for tt4, 0 for plain
  double h_sel = 0.0;
  double w_sel = 0.0;
  double omega = 0.0; ///< demodulated read value c * (a - ref)
  int chopper = 1;
  int pulses = 0; ///< W pulses emitted this step (whole array)
};

struct TraceResult {
  std::vector<TraceRecord> records;
  long w_pulses_total = 0;
  long w_pulses_before_switch = 0;
  long w_pulses_after_switch = 0;
};

struct WeightProgramResult {
  std::vector<long> eval_steps;
  std::vector<double> eps_abs;   ///< averaged over repeats, per eval step
  double final_eps_abs = 0.0;    ///< mean of the last 10% of evaluations
  double final_eps_rel = 0.0;    ///< final_eps_abs / target_std
  long w_pulses_total = 0;       ///< summed over repeats
  int repeats = 1;
};

/// Root-mean-square elementwise deviation between learned and target weights.
inline double compute_weight_error(const Matrix &w, const Matrix &target) {
  if (!w.same_shape(target)) {
    throw std::invalid_argument("compute_weight_error: shape mismatch");
  }
  double acc = 0.0;
  const std::size_t count = w.data().size();
  for (std::size_t idx = 0; idx < count; ++idx) {
    const double diff = w.data()[idx] - target.data()[idx];
    acc += diff * diff;
  }
  return std::sqrt(acc / static_cast<double>(count));
}

namespace detail {

inline CrossbarTile build_tile(const ExperimentConfig &cfg, const SeedSplitter &seeds) {
  RngStream rng_a = seeds.stream("device_a");
  RngStream rng_w = seeds.stream("device_w");
  RngStream rng_r = seeds.stream("reference");
  DeviceArray a(cfg.rows, cfg.cols, cfg.device_a, rng_a);
  DeviceArray w(cfg.rows, cfg.cols, cfg.device_w, rng_w);
  Matrix r = program_reference(a, cfg.reference.mu_r, cfg.reference.sigma_r, rng_r);
  return CrossbarTile(std::move(a), std::move(r), std::move(w), cfg.mvm);
}

inline std::vector<double> gauss_vector(int n, RngStream &rng) {
  std::vector<double> v(n);
  for (double &x : v) {
    x = rng.gauss();
  }
  return v;
}

} // namespace detail

/// Constant-gradient and gradient-switch-off traces. Per step, activations
/// are x = -X and gradient inputs d = alpha X + (1 - alpha) Y with fresh
/// standard-normal X, Y, so the expected update is diagonal and proportional
/// to -alpha. For trace_decay the gradient input becomes pure noise of scale
/// input_noise_scale after switch_step.
inline TraceResult run_trace_experiment(const ExperimentConfig &cfg) {
  if (cfg.kind != ExperimentKind::TraceConstantGradient &&
      cfg.kind != ExperimentKind::TraceDecay) {
    throw std::invalid_argument("run_trace_experiment: wrong experiment kind");
  }
  cfg.validate();
  SeedSplitter seeds(cfg.seed);
  CrossbarTile tile = detail::build_tile(cfg, seeds);
  Optimizer opt(cfg.optimizer, tile);
  RngStream inputs = seeds.stream("inputs");
  RngStream pulses = seeds.stream("pulses");
  RngStream choppers = seeds.stream("choppers");
  RngStream reads = seeds.stream("reads");

  const int n = cfg.cols;
  const int sel_i = cfg.trace.row;
  const int sel_j = cfg.trace.col;
  const bool tt4 = cfg.optimizer.algorithm == Algorithm::TT4;
  const bool plain = cfg.optimizer.algorithm == Algorithm::PlainSgd;

  TraceResult result;
  result.records.reserve(static_cast<std::size_t>(cfg.steps));
  for (long step = 0; step < cfg.steps; ++step) {
    const std::vector<double> x_base = detail::gauss_vector(n, inputs);
    const std::vector<double> y_noise = detail::gauss_vector(n, inputs);
    std::vector<double> x(n), d(n);
    const bool gradients_on = cfg.kind == ExperimentKind::TraceConstantGradient ||
                              step < cfg.switch_step;
    for (int j = 0; j < n; ++j) {
      x[j] = -x_base[j];
      d[j] = gradients_on ? cfg.alpha * x_base[j] + (1.0 - cfg.alpha) * y_noise[j]
                          : cfg.input_noise_scale * y_noise[j];
    }
    const StepResult sr = opt.sgd_step(x, d, pulses, choppers, reads);

    TraceRecord rec;
    rec.step = step;
    rec.a_sel = tile.a.weight(sel_i, sel_j);
    rec.ref_sel = plain ? 0.0
                        : (tt4 ? opt.state().mu_past(sel_i, sel_j)
                               : tile.reference(sel_i, sel_j));
    rec.h_sel = plain ? 0.0 : opt.state().h(sel_i, sel_j);
    rec.w_sel = tile.w.weight(sel_i, sel_j);
    rec.chopper = plain ? 1 : opt.state().choppers[sel_j];
    rec.omega = plain ? 0.0 : rec.chopper * (rec.a_sel - rec.ref_sel);
    rec.pulses = sr.w_pulses;
    result.records.push_back(rec);

    result.w_pulses_total += sr.w_pulses;
    if (step < cfg.switch_step) {
      result.w_pulses_before_switch += sr.w_pulses;
    } else {
      result.w_pulses_after_switch += sr.w_pulses;
    }
  }
  return result;
}

/// Response of n_devices independently sampled devices to a common signed
/// pulse pattern (up_pulses up, then down_pulses down, repeated). Row 0 of
/// the result holds the starting weights; column j is device j's trajectory.
inline Matrix run_device_traces(const DeviceParams &params, const DeviceTraceOptions &opts,
                                std::uint64_t seed) {
  SeedSplitter seeds(seed);
  RngStream sample_rng = seeds.stream("device_a");
  RngStream pulse_rng = seeds.stream("pulses");
  const int steps = (opts.up_pulses + opts.down_pulses) * opts.repeats;
  std::vector<DeviceElement> devices(opts.n_devices);
  for (DeviceElement &e : devices) {
    e = sample_element(params, sample_rng);
    e.w = std::clamp(opts.start_w, e.b_min, e.b_max);
  }
  Matrix traj(steps + 1, opts.n_devices);
  for (int j = 0; j < opts.n_devices; ++j) {
    traj(0, j) = devices[j].w;
  }
  int row = 1;
  for (int rep = 0; rep < opts.repeats; ++rep) {
    for (int p = 0; p < opts.up_pulses + opts.down_pulses; ++p) {
      const PulseDirection dir = p < opts.up_pulses ? PulseDirection::Up : PulseDirection::Down;
      for (int j = 0; j < opts.n_devices; ++j) {
        pulse_update(devices[j], dir, params.sigma_ctoc, &pulse_rng);
        traj(row, j) = devices[j].w;
      }
      ++row;
    }
  }
  return traj;
}

/// Trains the tile to reproduce a fixed random target matrix with the
/// configured algorithm; eps_w is tracked over training and averaged over
/// `repeats` independent pulsing runs. Target, device samples and the input
/// sequence are derived from the seed independently of the per-repeat
/// streams, so they are identical across algorithms and repeats.
inline WeightProgramResult run_weight_programming(const ExperimentConfig &cfg) {
  if (cfg.kind != ExperimentKind::WeightProgramming) {
    throw std::invalid_argument("run_weight_programming: wrong experiment kind");
  }
  cfg.validate();
  SeedSplitter seeds(cfg.seed);
  const int m = cfg.rows;
  const int n = cfg.cols;

  RngStream target_rng = seeds.stream("target");
  Matrix target(m, n);
  for (double &v : target.data()) {
    v = cfg.program.target_std * target_rng.gauss();
  }

  WeightProgramResult result;
  result.repeats = cfg.program.repeats;
  std::vector<double> eps_sum;

  for (int rep = 0; rep < cfg.program.repeats; ++rep) {
    CrossbarTile tile = detail::build_tile(cfg, seeds);
    if (cfg.program.init_w_to_target) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          tile.w.set_weight(i, j, target(i, j));
        }
      }
    }
    Optimizer opt(cfg.optimizer, tile);
    RngStream inputs = seeds.stream("inputs");
    RngStream pulses = seeds.stream("pulses", static_cast<std::uint64_t>(rep));
    RngStream choppers = seeds.stream("choppers", static_cast<std::uint64_t>(rep));
    RngStream reads = seeds.stream("reads", static_cast<std::uint64_t>(rep));

    std::vector<long> eval_steps;
    std::vector<double> eps;
    auto evaluate = [&](long step) {
      eval_steps.push_back(step);
      eps.push_back(compute_weight_error(tile.w.weights(), target));
    };
    evaluate(0);
    for (long step = 0; step < cfg.steps; ++step) {
      const std::vector<double> x = detail::gauss_vector(n, inputs);
      const std::vector<double> y = tile.forward(x, &reads);
      std::vector<double> d(m);
      for (int i = 0; i < m; ++i) {
        double y_hat = 0.0;
        for (int j = 0; j < n; ++j) {
          y_hat += target(i, j) * x[j];
        }
        d[i] = -(y[i] - y_hat) / static_cast<double>(m);
      }
      const StepResult sr = opt.sgd_step(x, d, pulses, choppers, reads);
      result.w_pulses_total += sr.w_pulses;
      if ((step + 1) % cfg.program.eval_every == 0 || step + 1 == cfg.steps) {
        evaluate(step + 1);
      }
    }
    if (rep == 0) {
      result.eval_steps = eval_steps;
      eps_sum.assign(eps.size(), 0.0);
    }
    for (std::size_t idx = 0; idx < eps.size(); ++idx) {
      eps_sum[idx] += eps[idx];
    }
  }

  result.eps_abs.resize(eps_sum.size());
  for (std::size_t idx = 0; idx < eps_sum.size(); ++idx) {
    result.eps_abs[idx] = eps_sum[idx] / cfg.program.repeats;
  }
  const std::size_t count = result.eps_abs.size();
  const std::size_t tail = std::max<std::size_t>(1, count / 10);
  double acc = 0.0;
  for (std::size_t idx = count - tail; idx < count; ++idx) {
    acc += result.eps_abs[idx];
  }
  result.final_eps_abs = acc / static_cast<double>(tail);
  result.final_eps_rel = result.final_eps_abs / cfg.program.target_std;
  return result;
}

} // namespace xbar
