#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qode/schedule.hpp"

namespace qode {

/// Tolerances and limits for the adaptive integrator.
struct IntegratorOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step_divisor = 100.0;  // first trial step = duration / divisor
  std::size_t max_steps = 4'000'000;    // accepted + rejected, per segment
};

struct SegmentStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

/// Sampled states, aligned time/state rows; states[0] is the initial condition.
struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
};

/// Evaluates one segment's vector field at y into dy (dy is overwritten).
void segment_rhs(const ControlSegment& seg, std::span<const double> y, std::span<double> dy);

/// Convenience allocating form.
std::vector<double> segment_rhs(const ControlSegment& seg, std::span<const double> y);

/// Propagates y0 across the segment with an embedded Dormand-Prince 5(4)
/// pair. Segment time is tracked as a countdown of the remaining duration so
/// steps stay resolvable when the flow steepens toward the end of the
/// segment. Throws IntegrationFailure (with segment_index) on step-size
/// underflow, non-finite states that cannot be stepped past, or step-budget
/// exhaustion.
std::vector<double> integrate_segment(const ControlSegment& seg, std::span<const double> y0,
                                      const IntegratorOptions& opts = {},
                                      SegmentStats* stats = nullptr, Trajectory* traj = nullptr,
                                      double time_offset = 0.0, int segment_index = 0);

/// Fixed-step reference path: `steps` equal steps of the 5th-order solution.
std::vector<double> integrate_segment_fixed(const ControlSegment& seg, std::span<const double> y0,
                                            int steps);

}  // namespace qode
