#include "qode/simulate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qode {

std::vector<double> embed_input(std::span<const double> x, int width) {
  if (x.empty()) throw std::invalid_argument("embed_input: input dimension must be >= 1");
  if (static_cast<int>(x.size()) > width) {
    throw std::invalid_argument("embed_input: input dimension " + std::to_string(x.size()) +
                                " exceeds width " + std::to_string(width));
  }
  std::vector<double> y(static_cast<std::size_t>(width), 0.0);
  std::copy(x.begin(), x.end(), y.begin());
  return y;
}

SimulationResult simulate(const ControlSchedule& sched, std::span<const double> x,
                          const IntegratorOptions& opts, Trajectory* traj) {
  if (static_cast<int>(x.size()) != sched.input_dim) {
    throw std::invalid_argument("simulate: input has dimension " + std::to_string(x.size()) +
                                " but the schedule expects " + std::to_string(sched.input_dim));
  }
  SimulationResult res;
  std::vector<double> y = embed_input(x, sched.width);
  if (traj) {
    traj->times.push_back(0.0);
    traj->states.push_back(y);
  }
  res.segment_stats.resize(sched.segments.size());
  res.segment_states.reserve(sched.segments.size());
  double t = 0.0;
  for (std::size_t s = 0; s < sched.segments.size(); ++s) {
    y = integrate_segment(sched.segments[s], y, opts, &res.segment_stats[s], traj, t,
                          static_cast<int>(s));
    t += sched.segments[s].duration;
    res.segment_states.push_back(y);
  }
  double out = 0.0;
  for (const auto& r : sched.readout) out += r.value * y[r.index];
  res.output = out;
  res.final_state = std::move(y);
  return res;
}

ControlSchedule rescale_schedule(const ControlSchedule& sched, double new_duration) {
  if (!(new_duration > 0.0) || !std::isfinite(new_duration)) {
    throw std::invalid_argument("rescale_schedule: new duration must be positive");
  }
  const double old_duration = sched.total_duration();
  if (!(old_duration > 0.0)) {
    throw std::invalid_argument("rescale_schedule: schedule has no segments to rescale");
  }
  const double time_scale = new_duration / old_duration;
  ControlSchedule out = sched;
  for (auto& seg : out.segments) {
    seg.duration *= time_scale;
    for (auto& t : seg.linear) t.value /= time_scale;
    for (auto& t : seg.quadratic) t.value /= time_scale;
    for (auto& t : seg.constant) t.value /= time_scale;
  }
  return out;
}

}  // namespace qode
