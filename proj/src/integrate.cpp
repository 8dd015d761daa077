#include "qode/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace qode {

void segment_rhs(const ControlSegment& seg, std::span<const double> y, std::span<double> dy) {
  std::fill(dy.begin(), dy.end(), 0.0);
  for (const auto& t : seg.linear) dy[t.row] += t.value * y[t.col];
  for (const auto& t : seg.quadratic) dy[t.row] += t.value * y[t.j] * y[t.k];
  for (const auto& t : seg.constant) dy[t.row] += t.value;
}

std::vector<double> segment_rhs(const ControlSegment& seg, std::span<const double> y) {
  std::vector<double> dy(y.size());
  segment_rhs(seg, y, dy);
  return dy;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192, kB5 = -2187.0 / 6784,
                 kB6 = 11.0 / 84;
// 5th-order minus 4th-order weights (error estimator).
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;

struct Stepper {
  const ControlSegment& seg;
  std::size_t n;
  std::vector<double> k1, k2, k3, k4, k5, k6, k7, tmp, y5;

  explicit Stepper(const ControlSegment& s, std::size_t dim)
      : seg(s), n(dim), k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), tmp(dim),
        y5(dim) {}

  // One trial step from y with size h; k1 must hold rhs(y). Fills y5 (5th
  // order solution) and k7 = rhs(y5); returns the scaled RMS error.
  double trial(const std::vector<double>& y, double h, double rtol, double atol) {
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * kA21 * k1[i];
    segment_rhs(seg, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (kA31 * k1[i] + kA32 * k2[i]);
    segment_rhs(seg, tmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (kA41 * k1[i] + kA42 * k2[i] + kA43 * k3[i]);
    segment_rhs(seg, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (kA51 * k1[i] + kA52 * k2[i] + kA53 * k3[i] + kA54 * k4[i]);
    segment_rhs(seg, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (kA61 * k1[i] + kA62 * k2[i] + kA63 * k3[i] + kA64 * k4[i] +
                           kA65 * k5[i]);
    segment_rhs(seg, tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      y5[i] = y[i] + h * (kB1 * k1[i] + kB3 * k3[i] + kB4 * k4[i] + kB5 * k5[i] + kB6 * k6[i]);
    segment_rhs(seg, y5, k7);

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = h * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] + kE5 * k5[i] +
                            kE6 * k6[i] + kE7 * k7[i]);
      const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      const double r = e / scale;
      sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(n));
  }
};

}  // namespace

namespace {

// Construction errors (out-of-range indices) surface at evaluation time for
// segments that were never validated as part of a schedule.
void check_segment_indices(const ControlSegment& seg, int n, int segment_index) {
  auto bad = [n](int i) { return i < 0 || i >= n; };
  bool oor = false;
  for (const auto& t : seg.linear) oor |= bad(t.row) || bad(t.col);
  for (const auto& t : seg.quadratic) oor |= bad(t.row) || bad(t.j) || bad(t.k);
  for (const auto& t : seg.constant) oor |= bad(t.row);
  if (oor) {
    throw InvalidSchedule("segment " + std::to_string(segment_index + 1) +
                          ": coefficient index out of range for state dimension " +
                          std::to_string(n));
  }
}

}  // namespace

std::vector<double> integrate_segment(const ControlSegment& seg, std::span<const double> y0,
                                      const IntegratorOptions& opts, SegmentStats* stats,
                                      Trajectory* traj, double time_offset, int segment_index) {
  const std::size_t n = y0.size();
  check_segment_indices(seg, static_cast<int>(n), segment_index);
  std::vector<double> y(y0.begin(), y0.end());
  if (seg.empty()) {
    if (stats) stats->accepted += 1;
    if (traj) {
      traj->times.push_back(time_offset + seg.duration);
      traj->states.push_back(y);
    }
    return y;
  }

  Stepper st(seg, n);
  segment_rhs(seg, y, st.k1);
  std::size_t evals = 1;

  double t_rem = seg.duration;
  double h = seg.duration / opts.initial_step_divisor;
  std::size_t accepted = 0, rejected = 0;
  const double h_floor = std::numeric_limits<double>::min() * 1e16;

  while (t_rem > 0.0) {
    if (accepted + rejected >= opts.max_steps) {
      throw IntegrationFailure(segment_index,
                               "integration failure in segment " +
                                   std::to_string(segment_index + 1) + ": step budget (" +
                                   std::to_string(opts.max_steps) + ") exhausted with " +
                                   std::to_string(t_rem) + " time units remaining");
    }
    const double hc = std::min(h, t_rem);
    const double err = st.trial(y, hc, opts.rtol, opts.atol);
    evals += 6;

    if (err <= 1.0) {  // NaN compares false, so non-finite trials are rejected
      const double t_next = t_rem - hc;
      if (t_next == t_rem) {
        throw IntegrationFailure(segment_index,
                                 "integration failure in segment " +
                                     std::to_string(segment_index + 1) +
                                     ": step size underflow (remaining time " +
                                     std::to_string(t_rem) + " cannot be resolved)");
      }
      t_rem = std::max(t_next, 0.0);
      y.swap(st.y5);
      st.k1.swap(st.k7);  // FSAL
      ++accepted;
      if (traj) {
        traj->times.push_back(time_offset + (seg.duration - t_rem));
        traj->states.push_back(y);
      }
    } else {
      ++rejected;
    }

    double fac = 0.2;
    if (std::isfinite(err)) {
      fac = std::clamp(0.9 * std::pow(std::max(err, 1e-300), -0.2), 0.2, 5.0);
    }
    h = hc * fac;
    if (h < h_floor) {
      throw IntegrationFailure(segment_index, "integration failure in segment " +
                                                  std::to_string(segment_index + 1) +
                                                  ": step size underflow (near-singular dynamics)");
    }
  }

  if (stats) {
    stats->accepted += accepted;
    stats->rejected += rejected;
    stats->rhs_evals += evals;
  }
  return y;
}

std::vector<double> integrate_segment_fixed(const ControlSegment& seg, std::span<const double> y0,
                                            int steps) {
  if (steps < 1) throw std::invalid_argument("integrate_segment_fixed: steps must be >= 1");
  const std::size_t n = y0.size();
  std::vector<double> y(y0.begin(), y0.end());
  Stepper st(seg, n);
  const double h = seg.duration / steps;
  for (int s = 0; s < steps; ++s) {
    segment_rhs(seg, y, st.k1);
    st.trial(y, h, 1.0, 1.0);
    y = st.y5;
  }
  return y;
}

}  // namespace qode
