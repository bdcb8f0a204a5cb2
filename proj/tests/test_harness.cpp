#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "xbar/experiment.hpp"

using namespace xbar;
using Catch::Approx;

namespace {

ExperimentConfig trace_defaults() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::TraceConstantGradient;
  cfg.device_a.dw_min = 0.05;
  cfg.device_a.sigma_b = 0.3;
  cfg.device_a.sigma_ctoc = 0.3;
  cfg.device_a.sigma_dtod = 0.3;
  cfg.device_a.sigma_updown = 0.3;
  cfg.device_w = cfg.device_a;
  cfg.rows = 10;
  cfg.cols = 10;
  cfg.steps = 1000;
  cfg.alpha = 0.5;
  cfg.seed = 7;
  cfg.optimizer.algorithm = Algorithm::TT2;
  return cfg;
}

} // namespace

TEST_CASE("harness: weight error metric", "[harness]") {
  Matrix w(3, 4), target(3, 4);
  RngStream rng(17);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      target(i, j) = 0.3 * rng.gauss();
      w(i, j) = target(i, j);
    }
  }
  CHECK(compute_weight_error(w, target) == 0.0);

  for (double &v : w.data()) {
    v += 0.1;
  }
  CHECK(compute_weight_error(w, target) == Approx(0.1));

  // random pair against a direct-summation oracle
  Matrix w2(3, 4);
  for (double &v : w2.data()) {
    v = rng.gauss();
  }
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      acc += (w2(i, j) - target(i, j)) * (w2(i, j) - target(i, j));
    }
  }
  CHECK(compute_weight_error(w2, target) == Approx(std::sqrt(acc / 12.0)));

  Matrix bad(4, 3);
  CHECK_THROWS_AS(compute_weight_error(bad, target), std::invalid_argument);
}

TEST_CASE("harness: all-up pulses saturate monotonically at b_max", "[harness]") {
  DeviceParams params;
  params.dw_min = 0.1;
  DeviceTraceOptions opts;
  opts.n_devices = 5;
  opts.up_pulses = 80;
  opts.down_pulses = 0;
  opts.repeats = 1;
  const Matrix traj = run_device_traces(params, opts, 3);
  for (int j = 0; j < opts.n_devices; ++j) {
    for (int i = 1; i < traj.rows(); ++i) {
      CHECK(traj(i, j) >= traj(i - 1, j));
    }
    CHECK(traj(traj.rows() - 1, j) == Approx(1.0).margin(1e-3));
  }
}

TEST_CASE("harness: n_states up pulses traverse the range", "[harness]") {
  // 20-state device driven up from b_min; compare against the recurrence
  DeviceParams params;
  params.dw_min = 0.1;
  DeviceTraceOptions opts;
  opts.n_devices = 1;
  opts.up_pulses = 20;
  opts.down_pulses = 0;
  opts.repeats = 1;
  opts.start_w = -1.0;
  const Matrix traj = run_device_traces(params, opts, 4);
  double w_oracle = -1.0;
  for (int i = 1; i <= 20; ++i) {
    w_oracle = w_oracle + 0.1 * (1.0 - w_oracle);
    CHECK(traj(i, 0) == Approx(w_oracle).margin(1e-12));
  }
  CHECK(traj(20, 0) > 0.7); // most of the range after n_states pulses
}

TEST_CASE("harness: slope dispersion follows the lognormal spread", "[harness]") {
  DeviceParams params;
  params.dw_min = 0.1;
  params.sigma_dtod = 0.3;
  DeviceTraceOptions opts;
  opts.n_devices = 1000;
  opts.up_pulses = 1;
  opts.down_pulses = 0;
  opts.repeats = 1;
  const Matrix traj = run_device_traces(params, opts, 5);
  double sum = 0.0, sum_sq = 0.0;
  for (int j = 0; j < opts.n_devices; ++j) {
    const double first_step = traj(1, j) - traj(0, j); // dw * gamma at w=0
    const double log_gamma = std::log(first_step / params.dw_min);
    sum += log_gamma;
    sum_sq += log_gamma * log_gamma;
  }
  const double mean = sum / opts.n_devices;
  const double std = std::sqrt(sum_sq / opts.n_devices - mean * mean);
  CHECK(std == Approx(0.3).epsilon(0.10));
}

TEST_CASE("harness: trace runs are deterministic", "[harness]") {
  ExperimentConfig cfg = trace_defaults();
  cfg.steps = 200;
  const TraceResult a = run_trace_experiment(cfg);
  const TraceResult b = run_trace_experiment(cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].a_sel == b.records[i].a_sel);
    CHECK(a.records[i].h_sel == b.records[i].h_sel);
    CHECK(a.records[i].w_sel == b.records[i].w_sel);
    CHECK(a.records[i].omega == b.records[i].omega);
    CHECK(a.records[i].pulses == b.records[i].pulses);
  }
  CHECK(a.w_pulses_total == b.w_pulses_total);
}

TEST_CASE("harness: constant negative gradient drives the selected element down",
          "[harness]") {
  ExperimentConfig cfg = trace_defaults();
  const TraceResult result = run_trace_experiment(cfg);
  // the accumulated gradient saturates at a biased negative level and the
  // threshold is crossed repeatedly
  double tail_mean = 0.0;
  const std::size_t tail = 200;
  for (std::size_t i = result.records.size() - tail; i < result.records.size(); ++i) {
    tail_mean += result.records[i].a_sel;
  }
  tail_mean /= tail;
  CHECK(tail_mean < -0.05);
  CHECK(result.w_pulses_total > 0);
  CHECK(result.records.back().w_sel < 0.0);
  // record invariant: omega is the demodulated read of the logged element
  for (const TraceRecord &rec : result.records) {
    CHECK(rec.omega == Approx(rec.chopper * (rec.a_sel - rec.ref_sel)).margin(1e-12));
    CHECK((rec.chopper == 1 || rec.chopper == -1));
  }
}

TEST_CASE("harness: trace omega uses mu_past for tt4", "[harness]") {
  ExperimentConfig cfg = trace_defaults();
  cfg.optimizer.algorithm = Algorithm::TT4;
  cfg.steps = 300;
  const TraceResult result = run_trace_experiment(cfg);
  bool saw_nonzero_ref = false;
  for (const TraceRecord &rec : result.records) {
    CHECK(rec.omega == Approx(rec.chopper * (rec.a_sel - rec.ref_sel)).margin(1e-12));
    saw_nonzero_ref = saw_nonzero_ref || rec.ref_sel != 0.0;
  }
  CHECK(saw_nonzero_ref); // the dynamic reference picked up the read history
}

TEST_CASE("harness: offset larger than the signal drives tt2's h against the gradient",
          "[harness]") {
  // reference programmed 0.8 below the symmetry points: the demodulated read
  // (a - sp) + 0.8 stays positive at saturation although the true gradient
  // is negative, so h accumulates in the wrong direction
  ExperimentConfig cfg = trace_defaults();
  cfg.reference.mu_r = -0.8;
  cfg.optimizer.gamma0 = 20000.0; // keep h below threshold for a clean read
  const TraceResult result = run_trace_experiment(cfg);
  double a_tail = 0.0, h_tail = 0.0;
  const std::size_t tail = 100;
  for (std::size_t i = result.records.size() - tail; i < result.records.size(); ++i) {
    a_tail += result.records[i].a_sel;
    h_tail += result.records[i].h_sel;
  }
  CHECK(a_tail / tail < 0.0); // gradient accumulates correctly on A
  CHECK(h_tail / tail > 0.0); // but h integrates the dominating offset
}

TEST_CASE("harness: demodulated reads keep the gradient sign across chopper phases",
          "[harness]") {
  // constant negative gradient, perfect reference: the mean of omega taken
  // separately over +1 and -1 chopper phases is negative in both
  ExperimentConfig cfg = trace_defaults();
  cfg.optimizer.algorithm = Algorithm::TT3;
  cfg.optimizer.chopper_deterministic = true;
  cfg.steps = 2000;
  const TraceResult result = run_trace_experiment(cfg);
  double sum_plus = 0.0, sum_minus = 0.0;
  long count_plus = 0, count_minus = 0;
  for (const TraceRecord &rec : result.records) {
    if (rec.step < 200) {
      continue; // skip the initial accumulation transient
    }
    if (rec.chopper > 0) {
      sum_plus += rec.omega;
      ++count_plus;
    } else {
      sum_minus += rec.omega;
      ++count_minus;
    }
  }
  REQUIRE(count_plus > 100);
  REQUIRE(count_minus > 100);
  CHECK(sum_plus / count_plus < 0.0);
  CHECK(sum_minus / count_minus < 0.0);
}

TEST_CASE("harness: device samples do not depend on the algorithm", "[harness]") {
  ExperimentConfig cfg = trace_defaults();
  cfg.optimizer.algorithm = Algorithm::TT2;
  SeedSplitter seeds_a(cfg.seed);
  const CrossbarTile tile_a = detail::build_tile(cfg, seeds_a);
  cfg.optimizer.algorithm = Algorithm::TT4;
  cfg.reference.sigma_r = 1.0; // reference stream is independent too
  SeedSplitter seeds_b(cfg.seed);
  const CrossbarTile tile_b = detail::build_tile(cfg, seeds_b);
  for (int i = 0; i < cfg.rows; ++i) {
    for (int j = 0; j < cfg.cols; ++j) {
      const DeviceElement ea = tile_a.a.element(i, j);
      const DeviceElement eb = tile_b.a.element(i, j);
      CHECK(ea.b_max == eb.b_max);
      CHECK(ea.alpha_plus == eb.alpha_plus);
      CHECK(tile_a.w.element(i, j).alpha_minus == tile_b.w.element(i, j).alpha_minus);
    }
  }
}

TEST_CASE("harness: after gradients stop, choppers quench the W pulses", "[harness]") {
  // an imperfect reference keeps tt2 integrating after the switch; the
  // fixed-period chopper cancels it (random phases would false-trigger
  // when lambda_h * phase * offset approaches the threshold)
  ExperimentConfig cfg = trace_defaults();
  cfg.kind = ExperimentKind::TraceDecay;
  cfg.rows = 5;
  cfg.cols = 5;
  cfg.steps = 600;
  cfg.switch_step = 300;
  cfg.input_noise_scale = 0.0001;
  cfg.reference.sigma_r = 0.5;

  cfg.optimizer.algorithm = Algorithm::TT2;
  const TraceResult tt2 = run_trace_experiment(cfg);
  cfg.optimizer.algorithm = Algorithm::TT3;
  cfg.optimizer.chopper_deterministic = true;
  const TraceResult tt3 = run_trace_experiment(cfg);
  CHECK(tt2.w_pulses_after_switch > 10);
  CHECK(tt3.w_pulses_after_switch <= tt2.w_pulses_after_switch / 4);
}

TEST_CASE("harness: high input fluctuations decay A to its symmetry point", "[harness]") {
  // with full-scale gradient noise after the switch, the unbiased pulse
  // traffic draws the accumulator to its fixed point and tt2 quiets down
  ExperimentConfig cfg = trace_defaults();
  cfg.kind = ExperimentKind::TraceDecay;
  cfg.steps = 1000;
  cfg.switch_step = 500;
  cfg.input_noise_scale = 1.0;
  cfg.seed = 1; // saturation level well separated from the symmetry point
  const TraceResult result = run_trace_experiment(cfg);

  SeedSplitter seeds(cfg.seed);
  const CrossbarTile tile = detail::build_tile(cfg, seeds);
  const double sp = tile.a.symmetry_point_at(cfg.trace.row, cfg.trace.col);
  const double at_switch = std::abs(result.records[cfg.switch_step - 1].a_sel - sp);
  const double at_end = std::abs(result.records.back().a_sel - sp);
  CHECK(at_switch > 0.5);
  CHECK(at_end < 0.35);
  CHECK(at_end < at_switch / 2.0);
  CHECK(result.w_pulses_after_switch < result.w_pulses_before_switch);
}

TEST_CASE("harness: weight programming with W initialized at the target", "[harness]") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::WeightProgramming;
  cfg.rows = 8;
  cfg.cols = 8;
  cfg.steps = 0;
  cfg.seed = 11;
  cfg.program.repeats = 1;
  cfg.program.init_w_to_target = true;
  cfg.device_w.sigma_b = 0.0; // bounds hold the target exactly
  const WeightProgramResult result = run_weight_programming(cfg);
  CHECK(result.final_eps_abs == 0.0);
  CHECK(result.final_eps_rel == 0.0);
}

TEST_CASE("harness: weight programming is deterministic", "[harness]") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::WeightProgramming;
  cfg.rows = 6;
  cfg.cols = 6;
  cfg.steps = 400;
  cfg.seed = 21;
  cfg.program.repeats = 2;
  cfg.program.eval_every = 100;
  cfg.optimizer.algorithm = Algorithm::TT3;
  cfg.optimizer.dynamic_eta = true;
  const WeightProgramResult a = run_weight_programming(cfg);
  const WeightProgramResult b = run_weight_programming(cfg);
  REQUIRE(a.eps_abs.size() == b.eps_abs.size());
  for (std::size_t i = 0; i < a.eps_abs.size(); ++i) {
    CHECK(a.eps_abs[i] == b.eps_abs[i]);
  }
  CHECK(a.w_pulses_total == b.w_pulses_total);
}

TEST_CASE("harness: tt4 results do not depend on the reference offset", "[harness]") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::WeightProgramming;
  cfg.rows = 8;
  cfg.cols = 8;
  cfg.steps = 600;
  cfg.seed = 33;
  cfg.program.repeats = 1;
  cfg.optimizer.algorithm = Algorithm::TT4;
  cfg.optimizer.dynamic_eta = true;
  cfg.device_a.sigma_updown = 0.3;
  cfg.device_w = cfg.device_a;

  cfg.reference.sigma_r = 0.0;
  const WeightProgramResult base = run_weight_programming(cfg);
  cfg.reference.sigma_r = 0.5;
  const WeightProgramResult shifted = run_weight_programming(cfg);
  REQUIRE(base.eps_abs.size() == shifted.eps_abs.size());
  for (std::size_t i = 0; i < base.eps_abs.size(); ++i) {
    CHECK(base.eps_abs[i] == shifted.eps_abs[i]);
  }
}

TEST_CASE("harness: plain sgd on a near-ideal device converges", "[harness]") {
  // fine-grained symmetric device: eps_w must fall well below the initial
  // error of one target std
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::WeightProgramming;
  cfg.rows = 10;
  cfg.cols = 10;
  cfg.steps = 3000;
  cfg.seed = 41;
  cfg.program.repeats = 1;
  cfg.program.eval_every = 200;
  cfg.optimizer.algorithm = Algorithm::PlainSgd;
  cfg.optimizer.dynamic_eta = true;
  cfg.device_a.dw_min = 0.002;
  cfg.device_w = cfg.device_a;
  const WeightProgramResult result = run_weight_programming(cfg);
  CHECK(result.eps_abs.front() == Approx(0.3).epsilon(0.25));
  CHECK(result.final_eps_abs < 0.1 * result.eps_abs.front());
}

TEST_CASE("harness: config validation catches bad dims and alpha", "[harness]") {
  ExperimentConfig cfg = trace_defaults();
  cfg.cols = 9; // trace experiments need square tiles
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = trace_defaults();
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = trace_defaults();
  cfg.kind = ExperimentKind::TraceDecay;
  cfg.switch_step = cfg.steps + 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
