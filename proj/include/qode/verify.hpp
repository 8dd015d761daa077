#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qode/ffnet.hpp"
#include "qode/integrate.hpp"
#include "qode/schedule.hpp"
#include "qode/sobolev.hpp"

namespace qode {

struct VerifyPoint {
  std::vector<double> x;
  double f = 0.0;       // target value
  double direct = 0.0;  // reference formula (no ODE)
  double ode = 0.0;     // schedule output
  bool failed = false;  // integration failure at this point
  std::string error;
};

struct VerificationReport {
  int grid = 0;
  int dim = 0;
  double eps = 0.0;
  double realization_tol = 1e-5;
  double bound = 0.0;
  std::vector<VerifyPoint> points;
  double sup_math = 0.0;         // |f - direct|
  double sup_realization = 0.0;  // |ode - direct|
  double sup_total = 0.0;        // |f - ode|
  int failures = 0;
  bool pass = false;
  std::vector<std::size_t> max_steps_per_segment;
};

/// All grid points i/(grid-1) per dimension, lexicographic.
std::vector<std::vector<double>> make_grid(int dim, int grid);

/// Grid verification against a smooth target: f, the direct blended-
/// polynomial evaluation, and the simulated schedule output per point.
VerificationReport verify_sobolev_grid(const ControlSchedule& sched, const SmoothTarget& target,
                                       const SobolevConfig& config, int grid,
                                       double realization_tol = 1e-5,
                                       const IntegratorOptions& opts = {}, int jobs = 0);

/// Grid verification against a feedforward net (the reference recurrence is
/// both the target and the direct formula).
VerificationReport verify_ffnet_grid(const ControlSchedule& sched, const FeedforwardNet& net,
                                     double eps, int grid, const IntegratorOptions& opts = {},
                                     int jobs = 0);

void write_report_csv(const std::string& path, const VerificationReport& rep);
nlohmann::ordered_json report_summary(const VerificationReport& rep);

}  // namespace qode
