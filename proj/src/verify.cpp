#include "qode/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <thread>

#include "qode/simulate.hpp"

namespace qode {

std::vector<std::vector<double>> make_grid(int dim, int grid) {
  if (grid < 2) throw std::invalid_argument("grid must have at least 2 points per dimension");
  std::vector<std::vector<double>> pts;
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  while (true) {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) x[j] = static_cast<double>(idx[j]) / (grid - 1);
    pts.push_back(std::move(x));
    int pos = dim - 1;
    while (pos >= 0 && idx[pos] == grid - 1) idx[pos--] = 0;
    if (pos < 0) break;
    ++idx[pos];
  }
  return pts;
}

namespace {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs) : hw;
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

VerificationReport run_grid(const ControlSchedule& sched, int dim, int grid, double eps,
                            double realization_tol, double bound, const IntegratorOptions& opts,
                            int jobs, const std::function<double(std::span<const double>)>& f,
                            const std::function<double(std::span<const double>)>& direct) {
  VerificationReport rep;
  rep.grid = grid;
  rep.dim = dim;
  rep.eps = eps;
  rep.realization_tol = realization_tol;
  rep.bound = bound;
  rep.points.resize(0);

  const auto pts = make_grid(dim, grid);
  rep.points.resize(pts.size());
  rep.max_steps_per_segment.assign(sched.segments.size(), 0);
  std::vector<std::vector<std::size_t>> steps(pts.size());

  parallel_for(pts.size(), jobs, [&](std::size_t i) {
    VerifyPoint& p = rep.points[i];
    p.x = pts[i];
    p.f = f(p.x);
    p.direct = direct(p.x);
    try {
      const auto sim = simulate(sched, p.x, opts);
      p.ode = sim.output;
      steps[i].resize(sim.segment_stats.size());
      for (std::size_t s = 0; s < sim.segment_stats.size(); ++s) {
        steps[i][s] = sim.segment_stats[s].accepted;
      }
    } catch (const IntegrationFailure& e) {
      p.failed = true;
      p.error = e.what();
    }
  });

  for (const auto& p : rep.points) {
    if (p.failed) {
      ++rep.failures;
      continue;
    }
    rep.sup_math = std::max(rep.sup_math, std::abs(p.f - p.direct));
    rep.sup_realization = std::max(rep.sup_realization, std::abs(p.ode - p.direct));
    rep.sup_total = std::max(rep.sup_total, std::abs(p.f - p.ode));
  }
  for (const auto& s : steps) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      rep.max_steps_per_segment[k] = std::max(rep.max_steps_per_segment[k], s[k]);
    }
  }
  rep.pass = rep.failures == 0 && rep.sup_total <= eps && rep.sup_realization <= realization_tol;
  return rep;
}

}  // namespace

VerificationReport verify_sobolev_grid(const ControlSchedule& sched, const SmoothTarget& target,
                                       const SobolevConfig& config, int grid,
                                       double realization_tol, const IntegratorOptions& opts,
                                       int jobs) {
  return run_grid(
      sched, config.dim, grid, config.eps, realization_tol,
      error_bound(config.order, config.dim, config.params.N, config.params.delta), opts, jobs,
      [&](std::span<const double> x) { return target.value(x); },
      [&](std::span<const double> x) { return direct_fhat_eval(target, config, x); });
}

VerificationReport verify_ffnet_grid(const ControlSchedule& sched, const FeedforwardNet& net,
                                     double eps, int grid, const IntegratorOptions& opts,
                                     int jobs) {
  auto f = [&](std::span<const double> x) { return net_eval(net, x); };
  return run_grid(sched, net.input_dim, grid, eps, eps, eps, opts, jobs, f, f);
}

void write_report_csv(const std::string& path, const VerificationReport& rep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (int j = 0; j < rep.dim; ++j) out << "x" << (j + 1) << ",";
  out << "f,fhat_direct,fhat_ode,err_math,err_realization,err_total\n";
  char buf[32];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& p : rep.points) {
    for (double xj : p.x) out << fmt(xj) << ",";
    if (p.failed) {
      out << "nan,nan,nan,nan,nan,nan\n";
      continue;
    }
    out << fmt(p.f) << "," << fmt(p.direct) << "," << fmt(p.ode) << ","
        << fmt(std::abs(p.f - p.direct)) << "," << fmt(std::abs(p.ode - p.direct)) << ","
        << fmt(std::abs(p.f - p.ode)) << "\n";
  }
}

nlohmann::ordered_json report_summary(const VerificationReport& rep) {
  nlohmann::ordered_json j;
  j["grid"] = rep.grid;
  j["dim"] = rep.dim;
  j["points"] = rep.points.size();
  j["eps"] = rep.eps;
  j["realization_tol"] = rep.realization_tol;
  j["bound"] = rep.bound;
  j["sup_math"] = rep.sup_math;
  j["sup_realization"] = rep.sup_realization;
  j["sup_total"] = rep.sup_total;
  j["integration_failures"] = rep.failures;
  j["max_steps_per_segment"] = rep.max_steps_per_segment;
  j["pass"] = rep.pass;
  return j;
}

}  // namespace qode
