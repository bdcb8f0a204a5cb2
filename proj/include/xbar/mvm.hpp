#pragma once

#include <cmath>
#include <cstdlib>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "xbar/device.hpp"
#include "xbar/matrix.hpp"
#include "xbar/rng.hpp"

namespace xbar {

// =============================================================================
// Analog matrix-vector products
// =============================================================================
// Forward, transposed (backward) and one-hot column reads over crossbar
// arrays, with optional additive output noise and input/output quantization.
// All knobs default to off, which gives the exact dense product.

struct MvmConfig {
  double out_noise = 0.0; ///< std of additive Gaussian output noise (0 = off)
  int in_bits = 0;        ///< input quantization bit width (0 = off)
  int out_bits = 0;       ///< output quantization bit width (0 = off)
  double out_bound = 20.0; ///< output clipping range, used when out_bits > 0

  bool all_off() const { return out_noise == 0.0 && in_bits == 0 && out_bits == 0; }

  void validate() const {
    if (out_noise < 0.0) {
      throw std::invalid_argument("mvm.out_noise must be >= 0");
    }
    auto check_bits = [](int bits, const char *what) {
      if (bits != 0 && (bits < 2 || bits > 16)) {
        throw std::invalid_argument(std::string(what) + " must be 0 or in [2, 16]");
      }
    };
    check_bits(in_bits, "mvm.in_bits");
    check_bits(out_bits, "mvm.out_bits");
    if (out_bits > 0 && !(out_bound > 0.0)) {
      throw std::invalid_argument("mvm.out_bound must be > 0 when mvm.out_bits > 0");
    }
  }
};

namespace detail {

/// Symmetric uniform quantizer over [-range, range]; zero is a code point and
/// quantizing an already-quantized value is the identity.
inline double quantize_symmetric(double v, double range, int bits) {
  if (range <= 0.0) {
    return v;
  }
  const double levels = static_cast<double>((1 << (bits - 1)) - 1);
  const double step = range / levels;
  return step * std::round(v / step);
}

inline std::vector<double> quantize_input(std::span<const double> x, int bits) {
  double max_abs = 0.0;
  for (double v : x) {
    max_abs = std::max(max_abs, std::abs(v));
  }
  std::vector<double> q(x.begin(), x.end());
  if (max_abs > 0.0) {
    for (double &v : q) {
      v = quantize_symmetric(v, max_abs, bits);
    }
  }
  return q;
}

inline void apply_output_stage(std::vector<double> &y, const MvmConfig &cfg, RngStream *rng) {
  if (cfg.out_noise > 0.0) {
    if (rng == nullptr) {
      throw std::invalid_argument("mvm: out_noise > 0 requires an rng stream");
    }
    for (double &v : y) {
      v += cfg.out_noise * rng->gauss();
    }
  }
  if (cfg.out_bits > 0) {
    for (double &v : y) {
      v = std::clamp(v, -cfg.out_bound, cfg.out_bound);
      v = quantize_symmetric(v, cfg.out_bound, cfg.out_bits);
    }
  }
}

/// y = W x over device weights, optionally minus a digital offset matrix.
inline std::vector<double> product(const DeviceArray &w, const Matrix *offset,
                                   std::span<const double> x, bool transposed) {
  const int m = w.rows();
  const int n = w.cols();
  const int in_dim = transposed ? m : n;
  const int out_dim = transposed ? n : m;
  if (static_cast<int>(x.size()) != in_dim) {
    throw std::invalid_argument("mvm: input dimension mismatch");
  }
  const std::vector<double> &flat = w.flat_weights();
  std::vector<double> y(out_dim, 0.0);
  if (!transposed) {
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      const double *row = flat.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double wij = offset ? row[j] - (*offset)(i, j) : row[j];
        acc += wij * x[j];
      }
      y[i] = acc;
    }
  } else {
    for (int i = 0; i < m; ++i) {
      const double *row = flat.data() + static_cast<std::size_t>(i) * n;
      const double di = x[i];
      for (int j = 0; j < n; ++j) {
        const double wij = offset ? row[j] - (*offset)(i, j) : row[j];
        y[j] += wij * di;
      }
    }
  }
  return y;
}

} // namespace detail

/// y = W x with the configured non-idealities.
inline std::vector<double> forward(const DeviceArray &w, std::span<const double> x,
                                   const MvmConfig &cfg, RngStream *rng,
                                   const Matrix *offset = nullptr) {
  std::vector<double> xq;
  std::span<const double> xin = x;
  if (cfg.in_bits > 0) {
    xq = detail::quantize_input(x, cfg.in_bits);
    xin = xq;
  }
  std::vector<double> y = detail::product(w, offset, xin, /*transposed=*/false);
  detail::apply_output_stage(y, cfg, rng);
  return y;
}

/// Transposed product W^T d (backward pass).
inline std::vector<double> backward(const DeviceArray &w, std::span<const double> d,
                                    const MvmConfig &cfg, RngStream *rng,
                                    const Matrix *offset = nullptr) {
  std::vector<double> dq;
  std::span<const double> din = d;
  if (cfg.in_bits > 0) {
    dq = detail::quantize_input(d, cfg.in_bits);
    din = dq;
  }
  std::vector<double> y = detail::product(w, offset, din, /*transposed=*/true);
  detail::apply_output_stage(y, cfg, rng);
  return y;
}

/// One-hot column read: y_i = a_ik - r_ik (reference = nullptr reads raw a_ik).
inline std::vector<double> read_column(const DeviceArray &a, const Matrix *reference, int k,
                                       const MvmConfig &cfg, RngStream *rng) {
  if (k < 0 || k >= a.cols()) {
    throw std::out_of_range("read_column: column index out of range");
  }
  std::vector<double> y(a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    y[i] = a.weight(i, k) - (reference ? (*reference)(i, k) : 0.0);
  }
  detail::apply_output_stage(y, cfg, rng);
  return y;
}

// =============================================================================
// Crossbar tile
// =============================================================================

/// The three per-layer arrays of the transfer optimizers: gradient accumulator
/// A, its digital reference matrix R (programmed to the symmetry points of A),
/// and the weight array W used in the forward/backward passes.
struct CrossbarTile {
  DeviceArray a;
  Matrix reference;
  DeviceArray w;
  MvmConfig mvm;
  /// Digital copy of W's symmetry points, subtracted in forward/backward
  /// reads when present.
  std::optional<Matrix> w_reference;

  CrossbarTile(DeviceArray a_array, Matrix r, DeviceArray w_array, MvmConfig cfg = {})
      : a(std::move(a_array)), reference(std::move(r)), w(std::move(w_array)), mvm(cfg) {
    if (a.rows() != w.rows() || a.cols() != w.cols() || reference.rows() != a.rows() ||
        reference.cols() != a.cols()) {
      throw std::invalid_argument("CrossbarTile: A, R, W must share dimensions");
    }
    mvm.validate();
  }

  int rows() const { return w.rows(); }
  int cols() const { return w.cols(); }

  void enable_w_reference() { w_reference = w.symmetry_points(); }

  std::vector<double> forward(std::span<const double> x, RngStream *rng) const {
    return xbar::forward(w, x, mvm, rng, w_reference ? &*w_reference : nullptr);
  }

  std::vector<double> backward(std::span<const double> d, RngStream *rng) const {
    return xbar::backward(w, d, mvm, rng, w_reference ? &*w_reference : nullptr);
  }
};

} // namespace xbar
