#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbar/matrix.hpp"
#include "xbar/rng.hpp"

namespace xbar {

// =============================================================================
// Soft-bounds device model
// =============================================================================
// A resistive element coded into a dimensionless weight w in [b_min, b_max].
// A single programming pulse moves w by a step that shrinks linearly toward
// the bound it is heading for:
//
//   up:    w += alpha_plus  * (b_max - w) / b_max * (1 + sigma_ctoc * xi)
//   down:  w -= alpha_minus * (b_min - w) / b_min * (1 + sigma_ctoc * xi)
//
// The weight value at which the average up and down responses coincide is the
// symmetry point; it is the stable fixed point under unbiased pulsing.

enum class PulseDirection { Up, Down };

/// Hyper-parameters of the device material (per-array, not per-element).
struct DeviceParams {
  double dw_min = 0.05;      ///< mean single-pulse step at w = 0
  double sigma_b = 0.0;      ///< relative bound variability
  double sigma_ctoc = 0.0;   ///< cycle-to-cycle pulse noise
  double sigma_dtod = 0.0;   ///< device-to-device slope variability (lognormal)
  double sigma_updown = 0.0; ///< device-to-device up/down slope difference

  double n_states() const { return 2.0 / dw_min; }

  /// dw_min from a state count, n_states = 2 / dw_min.
  static DeviceParams from_n_states(double n_states) {
    DeviceParams p;
    p.dw_min = 2.0 / n_states;
    return p;
  }

  void validate() const {
    if (!(dw_min > 0.0)) {
      throw std::invalid_argument("device.dw_min must be > 0");
    }
    if (sigma_b < 0.0 || sigma_ctoc < 0.0 || sigma_dtod < 0.0 || sigma_updown < 0.0) {
      throw std::invalid_argument("device sigma fields must be >= 0");
    }
    if (n_states() < 1.0) {
      throw std::invalid_argument("device.dw_min implies fewer than one state");
    }
  }
};

/// Sampled per-element state: weight, bounds and the two pulse slopes.
struct DeviceElement {
  double w = 0.0;
  double b_max = 1.0;
  double b_min = -1.0;
  double alpha_plus = 0.05;
  double alpha_minus = 0.05;

  bool degenerate() const {
    return !(b_max > 0.0) || !(b_min < 0.0) || !(alpha_plus > 0.0) || !(alpha_minus > 0.0);
  }
};

namespace detail {

/// Signed weight change of one pulse; noise factor is clamped at zero so a
/// pulse can never move the conductance against its drive direction.
inline double pulse_step(double w, PulseDirection dir, double b_max, double b_min,
                         double alpha_plus, double alpha_minus, double noise_factor) {
  if (dir == PulseDirection::Up) {
    return alpha_plus * (b_max - w) / b_max * noise_factor;
  }
  return -alpha_minus * (b_min - w) / b_min * noise_factor;
}

inline double noise_factor(double sigma_ctoc, RngStream *rng) {
  if (sigma_ctoc <= 0.0 || rng == nullptr) {
    return 1.0;
  }
  return std::max(0.0, 1.0 + sigma_ctoc * rng->gauss());
}

} // namespace detail

/// Applies one pulse to an element in place. Pass rng = nullptr for the
/// noiseless response. The result is clamped to [b_min, b_max].
inline void pulse_update(DeviceElement &elem, PulseDirection dir, double sigma_ctoc,
                         RngStream *rng) {
  const double f = detail::noise_factor(sigma_ctoc, rng);
  elem.w += detail::pulse_step(elem.w, dir, elem.b_max, elem.b_min, elem.alpha_plus,
                               elem.alpha_minus, f);
  elem.w = std::clamp(elem.w, elem.b_min, elem.b_max);
}

/// Weight value where average up and down pulse responses are equal.
inline double symmetry_point(const DeviceElement &elem) {
  if (elem.degenerate()) {
    throw std::invalid_argument("symmetry_point: degenerate device element");
  }
  return (elem.alpha_plus - elem.alpha_minus) /
         (elem.alpha_plus / elem.b_max - elem.alpha_minus / elem.b_min);
}

/// Draws one element's bounds and slopes. Degenerate draws (collapsed bound
/// or non-positive slope) are re-drawn up to a retry cap.
inline DeviceElement sample_element(const DeviceParams &params, RngStream &rng) {
  constexpr int kMaxResamples = 100;
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    DeviceElement e;
    e.b_max = std::max(1.0 + params.sigma_b * rng.gauss(), 0.0);
    e.b_min = std::min(-1.0 + params.sigma_b * rng.gauss(), 0.0);
    const double gamma = std::exp(params.sigma_dtod * rng.gauss());
    const double rho = params.sigma_updown * rng.gauss();
    e.alpha_plus = params.dw_min * (gamma + rho);
    e.alpha_minus = params.dw_min * (gamma - rho);
    e.w = 0.0;
    if (!e.degenerate()) {
      return e;
    }
  }
  throw std::runtime_error("sample_element: no valid device after 100 draws; "
                           "sigma settings are pathological");
}

/// A fixed-size grid of independently sampled soft-bounds elements.
/// Single-writer: pulses mutate state, reads are const.
class DeviceArray {
public:
  DeviceArray(int rows, int cols, const DeviceParams &params, RngStream &rng)
      : rows_(rows), cols_(cols), params_(params) {
    if (rows < 1 || cols < 1) {
      throw std::invalid_argument("DeviceArray: dimensions must be >= 1");
    }
    params_.validate();
    const std::size_t count = static_cast<std::size_t>(rows) * cols;
    w_.resize(count);
    b_max_.resize(count);
    b_min_.resize(count);
    alpha_plus_.resize(count);
    alpha_minus_.resize(count);
    for (std::size_t idx = 0; idx < count; ++idx) {
      const DeviceElement e = sample_element(params_, rng);
      w_[idx] = e.w;
      b_max_[idx] = e.b_max;
      b_min_[idx] = e.b_min;
      alpha_plus_[idx] = e.alpha_plus;
      alpha_minus_[idx] = e.alpha_minus;
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const DeviceParams &params() const { return params_; }

  double weight(int i, int j) const { return w_[index(i, j)]; }

  /// Direct weight assignment (digital programming for test setups);
  /// clamped to the element bounds.
  void set_weight(int i, int j, double value) {
    const std::size_t idx = index(i, j);
    w_[idx] = std::clamp(value, b_min_[idx], b_max_[idx]);
  }

  DeviceElement element(int i, int j) const {
    const std::size_t idx = index(i, j);
    return DeviceElement{w_[idx], b_max_[idx], b_min_[idx], alpha_plus_[idx], alpha_minus_[idx]};
  }

  /// One programming pulse on element (i, j).
  void pulse(int i, int j, PulseDirection dir, RngStream *rng) {
    const std::size_t idx = index(i, j);
    const double f = detail::noise_factor(params_.sigma_ctoc, rng);
    w_[idx] += detail::pulse_step(w_[idx], dir, b_max_[idx], b_min_[idx], alpha_plus_[idx],
                                  alpha_minus_[idx], f);
    w_[idx] = std::clamp(w_[idx], b_min_[idx], b_max_[idx]);
  }

  double symmetry_point_at(int i, int j) const { return symmetry_point(element(i, j)); }

  Matrix symmetry_points() const {
    Matrix sp(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) {
        sp(i, j) = symmetry_point_at(i, j);
      }
    }
    return sp;
  }

  Matrix weights() const {
    Matrix w(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) {
        w(i, j) = weight(i, j);
      }
    }
    return w;
  }

  // Flat row-major views used by the update and read kernels.
  const std::vector<double> &flat_weights() const { return w_; }
  std::size_t index(int i, int j) const {
    if (i < 0 || i >= rows_ || j < 0 || j >= cols_) {
      throw std::out_of_range("DeviceArray: element index out of range");
    }
    return static_cast<std::size_t>(i) * cols_ + j;
  }

private:
  int rows_ = 0;
  int cols_ = 0;
  DeviceParams params_;
  std::vector<double> w_, b_max_, b_min_, alpha_plus_, alpha_minus_;
};

/// Models programming a reference matrix to the symmetry points of A,
/// with a residual offset o_r = mu_r + sigma_r * xi per element. The result
/// is a static digital value matrix; it is never pulsed.
inline Matrix program_reference(const DeviceArray &a, double mu_r, double sigma_r,
                                RngStream &rng) {
  Matrix r(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      r(i, j) = a.symmetry_point_at(i, j) + mu_r + sigma_r * rng.gauss();
    }
  }
  return r;
}

} // namespace xbar
