#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "xbar/device.hpp"
#include "xbar/rng.hpp"

namespace xbar {

// =============================================================================
// Stochastic pulse-coincidence outer-product update
// =============================================================================
// The outer product eta * d x^T is written onto a device array by sending
// stochastic pulse trains down the rows and columns; a device is pulsed where
// a row and a column pulse coincide. Train length is sized dynamically from
// the expected pulse demand kappa = eta * m_x * m_d / dw_min.

/// Derived pulse-train quantities for one update call.
struct PulsePlan {
  double kappa = 0.0;   ///< expected pulse demand
  int length = 0;       ///< actual train length l, 0 = no update
  int l_max = 0;        ///< configured maximum train length
  double m_x = 0.0;     ///< max |x_j|
  double m_d = 0.0;     ///< max |d_i|
  double m_d_eff = 0.0; ///< m_d scaled into the representable range
  double a = 0.0;       ///< gradient-side firing probability scale
  double b = 0.0;       ///< activation-side firing probability scale

  bool empty() const { return length == 0; }
};

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) {
    m = std::max(m, std::abs(x));
  }
  return m;
}

/// Sizes the pulse train for one update of eta * d x^T.
///
/// The printed form of the probability scales uses l_max in the denominator
/// of b; with trains of length l < l_max that under-scales the expected
/// update by sqrt(l / l_max). We use l in both denominators, which makes
/// a * b * l == eta / dw_min exactly; verbatim_coeffs restores the printed
/// form for comparison.
inline PulsePlan plan_pulses(std::span<const double> x, std::span<const double> d, double eta,
                             double dw_min, int l_max, bool verbatim_coeffs = false) {
  if (!(eta > 0.0)) {
    throw std::invalid_argument("plan_pulses: eta must be > 0");
  }
  if (l_max < 1) {
    throw std::invalid_argument("plan_pulses: l_max must be >= 1");
  }
  PulsePlan plan;
  plan.l_max = l_max;
  plan.m_x = max_abs(x);
  plan.m_d = max_abs(d);
  if (plan.m_x == 0.0 || plan.m_d == 0.0) {
    return plan; // nothing to update
  }
  plan.kappa = eta * plan.m_x * plan.m_d / dw_min;
  plan.length = static_cast<int>(std::min<double>(l_max, std::ceil(plan.kappa)));
  plan.m_d_eff = plan.m_d * std::min(static_cast<double>(l_max) / plan.kappa, 1.0);
  const double l = static_cast<double>(plan.length);
  const double b_denom = verbatim_coeffs ? static_cast<double>(l_max) : l;
  plan.a = std::sqrt(eta * plan.m_x / (l * plan.m_d_eff * dw_min));
  plan.b = std::sqrt(eta * plan.m_d_eff / (b_denom * plan.m_x * dw_min));
  return plan;
}

/// Applies the planned stochastic pulse trains onto the array. Per round,
/// row pulses q_i = sign(d_i) fire with probability min(1, a |d_i|) and
/// column pulses p_j = sign(x_j) with min(1, b |x_j|); each coincidence
/// pulses device (i, j) in direction sign(q_i p_j).
///
/// Returns the number of device pulses applied.
inline long stochastic_outer_update(DeviceArray &w, std::span<const double> x,
                                    std::span<const double> d, const PulsePlan &plan,
                                    RngStream &rng) {
  const int m = w.rows();
  const int n = w.cols();
  if (static_cast<int>(d.size()) != m || static_cast<int>(x.size()) != n) {
    throw std::invalid_argument("stochastic_outer_update: dimension mismatch");
  }
  if (plan.empty()) {
    return 0;
  }
  long pulses = 0;
  std::vector<std::int8_t> q(m);
  std::vector<int> fired_rows;
  std::vector<int> fired_cols;
  fired_rows.reserve(m);
  fired_cols.reserve(n);
  for (int round = 0; round < plan.length; ++round) {
    fired_rows.clear();
    fired_cols.clear();
    for (int i = 0; i < m; ++i) {
      const double di = d[i];
      if (di != 0.0 && rng.uniform() < plan.a * std::abs(di)) {
        q[i] = di > 0.0 ? 1 : -1;
        fired_rows.push_back(i);
      }
    }
    for (int j = 0; j < n; ++j) {
      const double xj = x[j];
      if (xj != 0.0 && rng.uniform() < plan.b * std::abs(xj)) {
        fired_cols.push_back(j);
      }
    }
    for (int i : fired_rows) {
      const bool row_positive = q[i] > 0;
      for (int j : fired_cols) {
        const bool up = row_positive == (x[j] > 0.0);
        w.pulse(i, j, up ? PulseDirection::Up : PulseDirection::Down, &rng);
        ++pulses;
      }
    }
  }
  return pulses;
}

} // namespace xbar
