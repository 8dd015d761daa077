#pragma once

#include <span>
#include <vector>

#include "qode/integrate.hpp"
#include "qode/schedule.hpp"

namespace qode {

/// Lifts a d-dimensional input to the W-dimensional initial state:
/// y[i] = x[i] for i < d, zero elsewhere. Rejects empty x or d > W.
std::vector<double> embed_input(std::span<const double> x, int width);

struct SimulationResult {
  double output = 0.0;
  std::vector<double> final_state;
  std::vector<SegmentStats> segment_stats;          // per-segment step accounting
  std::vector<std::vector<double>> segment_states;  // state after each segment
};

/// Embeds x, integrates the segments in order and applies the readout.
/// Trajectory capture is optional and does not affect the result.
SimulationResult simulate(const ControlSchedule& sched, std::span<const double> x,
                          const IntegratorOptions& opts = {}, Trajectory* traj = nullptr);

/// Changes the horizon to `new_duration`, scaling every segment duration by
/// new/old and every coefficient by old/new; the input-output map is
/// unchanged. Rejects new_duration <= 0 and empty schedules.
ControlSchedule rescale_schedule(const ControlSchedule& sched, double new_duration);

}  // namespace qode
