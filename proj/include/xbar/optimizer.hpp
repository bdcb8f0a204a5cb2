#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbar/mvm.hpp"
#include "xbar/pulsed_update.hpp"

namespace xbar {

// =============================================================================
// In-memory training algorithms
// =============================================================================
// Four optimizers over one crossbar tile:
//
//   plain_sgd  stochastic outer-product updates applied directly to W
//   tt2        gradients accumulated on A, read via A - R, low-pass filtered
//              on a digital hidden matrix H, threshold pulses onto W
//   tt3        tt2 plus chopper sign modulation of the activations, removing
//              any constant offset between A and R
//   tt4        chopped transfer reading A directly, with a dynamically
//              estimated reference (the leaky average of A over the previous
//              chopper phase) instead of R

enum class Algorithm { PlainSgd, TT2, TT3, TT4 };

inline const char *to_string(Algorithm a) {
  switch (a) {
  case Algorithm::PlainSgd:
    return "plain_sgd";
  case Algorithm::TT2:
    return "tt2";
  case Algorithm::TT3:
    return "tt3";
  case Algorithm::TT4:
    return "tt4";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string &name) {
  if (name == "plain_sgd") {
    return Algorithm::PlainSgd;
  }
  if (name == "tt2") {
    return Algorithm::TT2;
  }
  if (name == "tt3") {
    return Algorithm::TT3;
  }
  if (name == "tt4") {
    return Algorithm::TT4;
  }
  throw std::invalid_argument("unknown algorithm '" + name +
                              "' (expected plain_sgd, tt2, tt3 or tt4)");
}

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::TT3;
  double lambda = 0.1;  ///< SGD learning rate
  double gamma0 = 200.0; ///< buffer scale (accumulation length on H)
  int n_s = 1;          ///< updates per transfer
  double rho = 0.1;     ///< chopper probability (tt3) / 1 over period (tt4)
  double beta = 0.5;    ///< leaky-average coefficient of the tt4 reference
  double eta0 = 1.0;    ///< update scale onto A (or W for plain_sgd)
  int l_max = 5;        ///< max pulses per update train
  double ema_coeff = 0.9; ///< running-average coefficient for mu_x, mu_d
  bool dynamic_eta = false; ///< rescale eta by the running input maxima
  bool correct_w_sp = false; ///< subtract the SP of W in forward/backward reads
  bool paper_verbatim_coeffs = false;  ///< printed b-coefficient of the pulse plan
  bool paper_verbatim_chopper = false; ///< printed flip direction (prob 1 - rho)
  bool chopper_deterministic = false;  ///< tt3 flips on a fixed period instead

  void validate() const {
    if (!(lambda > 0.0)) {
      throw std::invalid_argument("optimizer.lambda must be > 0");
    }
    if (!(gamma0 > 0.0)) {
      throw std::invalid_argument("optimizer.gamma0 must be > 0");
    }
    if (n_s < 1) {
      throw std::invalid_argument("optimizer.n_s must be >= 1");
    }
    // rho = 0 freezes the tt3 choppers (the tt2 limit); tt4 derives its
    // flip period from 1 / rho and needs a positive value
    if (rho < 0.0 || rho > 1.0) {
      throw std::invalid_argument("optimizer.rho must be in [0, 1]");
    }
    if (algorithm == Algorithm::TT4 && !(rho > 0.0)) {
      throw std::invalid_argument("optimizer.rho must be > 0 for tt4");
    }
    if (!(beta > 0.0) || beta > 1.0) {
      throw std::invalid_argument("optimizer.beta must be in (0, 1]");
    }
    if (!(eta0 > 0.0)) {
      throw std::invalid_argument("optimizer.eta0 must be > 0");
    }
    if (l_max < 1) {
      throw std::invalid_argument("optimizer.l_max must be >= 1");
    }
    if (ema_coeff < 0.0 || ema_coeff >= 1.0) {
      throw std::invalid_argument("optimizer.ema_coeff must be in [0, 1)");
    }
  }
};

/// Hidden-matrix write rate lambda_H = lambda * n_s * n / (gamma0 * dw_min);
/// equivalently lambda / gamma with gamma = gamma0 * dw_min / (n * n_s).
inline double effective_hidden_rate(const OptimizerConfig &cfg, int n, double dw_min) {
  if (n < 1) {
    throw std::invalid_argument("effective_hidden_rate: n must be >= 1");
  }
  return cfg.lambda * cfg.n_s * n / (cfg.gamma0 * dw_min);
}

/// Update scale eta = eta0 * l_max * dw_min / (mu_x * mu_d). With eta0 = 1,
/// a gradient product at the running maxima demands exactly l_max pulses;
/// anything above is clipped.
inline double effective_eta(const OptimizerConfig &cfg, double mu_x, double mu_d,
                            double dw_min) {
  constexpr double kFloor = 1e-12;
  const double mx = std::max(mu_x, kFloor);
  const double md = std::max(mu_d, kFloor);
  return cfg.eta0 * cfg.l_max * dw_min / (mx * md);
}

/// Digital optimizer state between the analog arrays.
struct TransferState {
  Matrix h;       ///< hidden accumulator
  Matrix mu;      ///< leaky average of current-phase reads (tt4)
  Matrix mu_past; ///< frozen reference from the previous chopper phase (tt4)
  std::vector<int> choppers;          ///< per-column signs, exactly +-1
  std::vector<long> column_visits;    ///< per-column transfer counts
  int s = 0;  ///< updates since the last transfer
  int k = 0;  ///< most recently transferred column
  long t = 0; ///< total transfers
  double mu_x = -1.0; ///< running average of m_x (< 0 = not yet observed)
  double mu_d = -1.0; ///< running average of m_d

  TransferState() = default;
  TransferState(int rows, int cols)
      : h(rows, cols), mu(rows, cols), mu_past(rows, cols), choppers(cols, 1),
        column_visits(cols, 0) {}
};

/// One per-row sample of a transfer, for trace logging and tests.
struct TransferSample {
  long t = 0;
  int k = 0;
  int i = 0;
  double a_device = 0.0;    ///< device weight a_ik at read time
  double reference = 0.0;   ///< r_ik (tt2/tt3) or mu_past_ik (tt4)
  double y_read = 0.0;      ///< value actually read (incl. MVM non-idealities)
  double h_increment = 0.0; ///< signed increment written onto h_ik
  double h_after = 0.0;     ///< h_ik after increment and threshold handling
  double w_device = 0.0;    ///< device weight w_ik after any pulse
  int chopper = 1;
  int pulse = 0; ///< -1, 0, +1
};

using TransferHook = std::function<void(const TransferSample &)>;

struct StepResult {
  long device_pulses = 0; ///< coincidence pulses onto the update target
  int w_pulses = 0;       ///< threshold pulses onto W (equals coincidence
                          ///< count for plain_sgd)
  bool transferred = false;
};

/// Runs one of the four algorithms against a tile it exclusively owns for
/// the duration of training. Steps are strictly sequential.
class Optimizer {
public:
  Optimizer(OptimizerConfig cfg, CrossbarTile &tile)
      : cfg_(cfg), tile_(tile), state_(tile.rows(), tile.cols()),
        last_increment_(tile.rows(), 0.0) {
    cfg_.validate();
    if (cfg_.correct_w_sp) {
      tile_.enable_w_reference();
    }
  }

  const OptimizerConfig &config() const { return cfg_; }
  const TransferState &state() const { return state_; }
  TransferState &mutable_state() { return state_; }
  CrossbarTile &tile() { return tile_; }

  void set_transfer_hook(TransferHook hook) { hook_ = std::move(hook); }

  double hidden_rate() const {
    return effective_hidden_rate(cfg_, tile_.cols(), tile_.a.params().dw_min);
  }

  double current_eta() const {
    if (!cfg_.dynamic_eta) {
      return cfg_.eta0;
    }
    // before the first observation, fall back to unit running averages
    const double mx = state_.mu_x < 0.0 ? 1.0 : state_.mu_x;
    const double md = state_.mu_d < 0.0 ? 1.0 : state_.mu_d;
    return effective_eta(cfg_, mx, md, update_target().params().dw_min);
  }

  /// Gradient accumulation: one stochastic outer-product update of
  /// eta * d x^T onto A (chopper-modulated activations) or onto W directly
  /// for plain_sgd.
  long update_phase(std::span<const double> x, std::span<const double> d,
                    RngStream &pulse_rng) {
    if (static_cast<int>(x.size()) != tile_.cols() ||
        static_cast<int>(d.size()) != tile_.rows()) {
      throw std::invalid_argument("update_phase: dimension mismatch");
    }
    observe_maxima(max_abs(x), max_abs(d));
    const double eta = current_eta();
    DeviceArray &target = update_target();
    const double dw = target.params().dw_min;

    std::vector<double> x_mod(x.begin(), x.end());
    if (uses_choppers()) {
      for (int j = 0; j < tile_.cols(); ++j) {
        x_mod[j] *= state_.choppers[j];
      }
    }
    PulsePlan plan = plan_pulses(x_mod, d, eta, dw, cfg_.l_max, cfg_.paper_verbatim_coeffs);
    const long pulses = stochastic_outer_update(target, x_mod, d, plan, pulse_rng);
    if (cfg_.algorithm != Algorithm::PlainSgd) {
      state_.s += 1;
    }
    return pulses;
  }

  /// Column transfer: read one column of A (demodulated, reference-subtracted),
  /// accumulate onto H, emit threshold pulses onto W, then handle the chopper.
  int transfer_phase(RngStream &pulse_rng, RngStream &chopper_rng, RngStream &read_rng) {
    state_.s = 0;
    state_.t += 1;
    state_.k = (state_.k + 1) % tile_.cols();
    const int k = state_.k;
    state_.column_visits[k] += 1;

    const bool tt4 = cfg_.algorithm == Algorithm::TT4;
    const std::vector<double> y =
        read_column(tile_.a, tt4 ? nullptr : &tile_.reference, k, tile_.mvm, &read_rng);

    const double lambda_h = hidden_rate();
    const int c_k = state_.choppers[k];
    const int m = tile_.rows();
    std::vector<std::int8_t> pulse(m, 0);
    int emitted = 0;
    for (int i = 0; i < m; ++i) {
      const double ref = tt4 ? state_.mu_past(i, k) : 0.0;
      const double increment = c_k * lambda_h * (y[i] - ref);
      state_.h(i, k) += increment;
      if (tt4) {
        state_.mu(i, k) = (1.0 - cfg_.beta) * state_.mu(i, k) + cfg_.beta * y[i];
      }
      if (std::abs(state_.h(i, k)) > 1.0) {
        pulse[i] = state_.h(i, k) > 0.0 ? 1 : -1;
        state_.h(i, k) = 0.0;
        ++emitted;
      }
      if (hook_) {
        last_increment_[i] = increment;
      }
    }
    for (int i = 0; i < m; ++i) {
      if (pulse[i] != 0) {
        tile_.w.pulse(i, k, pulse[i] > 0 ? PulseDirection::Up : PulseDirection::Down,
                      &pulse_rng);
      }
    }
    if (hook_) {
      for (int i = 0; i < m; ++i) {
        TransferSample sample;
        sample.t = state_.t;
        sample.k = k;
        sample.i = i;
        sample.a_device = tile_.a.weight(i, k);
        sample.reference = tt4 ? state_.mu_past(i, k) : tile_.reference(i, k);
        sample.y_read = y[i];
        sample.h_increment = last_increment_[i];
        sample.h_after = state_.h(i, k);
        sample.w_device = tile_.w.weight(i, k);
        sample.chopper = c_k;
        sample.pulse = pulse[i];
        hook_(sample);
      }
    }
    handle_chopper(k, chopper_rng);
    return emitted;
  }

  /// One (x, d) pair: gradient accumulation plus a transfer when due.
  StepResult sgd_step(std::span<const double> x, std::span<const double> d,
                      RngStream &pulse_rng, RngStream &chopper_rng, RngStream &read_rng) {
    StepResult result;
    result.device_pulses = update_phase(x, d, pulse_rng);
    if (cfg_.algorithm == Algorithm::PlainSgd) {
      result.w_pulses = static_cast<int>(result.device_pulses);
      return result;
    }
    if (state_.s == cfg_.n_s) {
      result.w_pulses = transfer_phase(pulse_rng, chopper_rng, read_rng);
      result.transferred = true;
    }
    return result;
  }

private:
  DeviceArray &update_target() {
    return cfg_.algorithm == Algorithm::PlainSgd ? tile_.w : tile_.a;
  }

  const DeviceArray &update_target() const {
    return cfg_.algorithm == Algorithm::PlainSgd ? tile_.w : tile_.a;
  }

  bool uses_choppers() const {
    // tt2 runs the tt3 path with flips disabled, so the two algorithms are
    // bit-identical under a shared rng stream when rho plays no role.
    return cfg_.algorithm == Algorithm::TT2 || cfg_.algorithm == Algorithm::TT3 ||
           cfg_.algorithm == Algorithm::TT4;
  }

  void observe_maxima(double m_x, double m_d) {
    if (state_.mu_x < 0.0) {
      state_.mu_x = m_x;
      state_.mu_d = m_d;
      return;
    }
    state_.mu_x = cfg_.ema_coeff * state_.mu_x + (1.0 - cfg_.ema_coeff) * m_x;
    state_.mu_d = cfg_.ema_coeff * state_.mu_d + (1.0 - cfg_.ema_coeff) * m_d;
  }

  int chopper_period() const { return static_cast<int>(std::ceil(1.0 / cfg_.rho)); }

  void handle_chopper(int k, RngStream &chopper_rng) {
    switch (cfg_.algorithm) {
    case Algorithm::PlainSgd:
      return;
    case Algorithm::TT2:
      // keep the draw so tt2 and tt3 with rho = 0-like settings stay aligned
      chopper_rng.uniform();
      return;
    case Algorithm::TT3: {
      if (cfg_.chopper_deterministic) {
        if (cfg_.rho > 0.0 && state_.column_visits[k] % chopper_period() == 0) {
          state_.choppers[k] = -state_.choppers[k];
        }
        return;
      }
      const double xi = chopper_rng.uniform();
      const bool flip = cfg_.paper_verbatim_chopper ? (cfg_.rho < xi) : (xi < cfg_.rho);
      if (flip) {
        state_.choppers[k] = -state_.choppers[k];
      }
      return;
    }
    case Algorithm::TT4: {
      // regular switching: the printed schedule gates on the global transfer
      // count, which skips most columns whenever the period divides n; we
      // count per-column visits so every column flips once per period.
      if (state_.column_visits[k] % chopper_period() == 0) {
        state_.choppers[k] = -state_.choppers[k];
        for (int i = 0; i < tile_.rows(); ++i) {
          state_.mu_past(i, k) = state_.mu(i, k);
          state_.mu(i, k) = 0.0;
        }
      }
      return;
    }
    }
  }

  OptimizerConfig cfg_;
  CrossbarTile &tile_;
  TransferState state_;
  TransferHook hook_;
  std::vector<double> last_increment_;
};

} // namespace xbar
