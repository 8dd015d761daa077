#include <CLI11.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "qode/bootstrap.hpp"
#include "qode/ffnet.hpp"
#include "qode/gadgets.hpp"
#include "qode/linalg.hpp"
#include "qode/schedule_io.hpp"
#include "qode/simulate.hpp"
#include "qode/sobolev.hpp"
#include "qode/targets.hpp"
#include "qode/verify.hpp"

namespace {

using nlohmann::ordered_json;
using namespace qode;

constexpr int kExitPass = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

IntegratorOptions env_default_tolerances() {
  IntegratorOptions opts;
  if (const char* env = std::getenv("QODE_DEFAULT_TOL")) {
    std::string s(env);
    const auto comma = s.find(',');
    try {
      opts.rtol = std::stod(s.substr(0, comma));
      if (comma != std::string::npos) opts.atol = std::stod(s.substr(comma + 1));
    } catch (...) {
      std::cerr << "warning: cannot parse QODE_DEFAULT_TOL='" << s << "', using defaults\n";
    }
  }
  return opts;
}

std::vector<double> parse_vector(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

ordered_json layout_json(const StateLayout& lay) {
  ordered_json j;
  j["dim"] = lay.dim;
  j["N"] = lay.N;
  auto arr1 = [](auto&& f, int n) {
    ordered_json a = ordered_json::array();
    for (int i = 0; i < n; ++i) a.push_back(f(i) + 1);
    return a;
  };
  j["alpha"] = arr1([&](int i) { return lay.alpha(i); }, lay.dim);
  ordered_json lam = ordered_json::array(), mu = ordered_json::array();
  for (int jj = 0; jj < lay.dim; ++jj) {
    ordered_json lrow = ordered_json::array(), mrow = ordered_json::array();
    for (int k = 0; k <= lay.N; ++k) {
      lrow.push_back(lay.lambda_slot(jj, k) + 1);
      mrow.push_back(lay.mu_slot(jj, k) + 1);
    }
    lam.push_back(std::move(lrow));
    mu.push_back(std::move(mrow));
  }
  j["lambda"] = std::move(lam);
  j["beta"] = arr1([&](int i) { return lay.beta(i); }, lay.dim);
  j["mu"] = std::move(mu);
  j["sum"] = lay.sum_slot() + 1;
  if (lay.shadow) {
    ordered_json sh = ordered_json::array();
    for (int jj = 0; jj < lay.dim; ++jj) {
      ordered_json row = ordered_json::array();
      for (int k = 1; k <= lay.N; ++k) row.push_back(lay.shadow_slot(jj, k) + 1);
      sh.push_back(std::move(row));
    }
    j["shadow"] = std::move(sh);
  }
  return j;
}

std::string default_report_path(const std::string& out) {
  const auto dot = out.rfind('.');
  return (dot == std::string::npos ? out : out.substr(0, dot)) + ".report.json";
}

void write_json(const std::string& path, const ordered_json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << j.dump(1) << "\n";
}

// ---------------------------------------------------------------------------
// compile-sobolev

int cmd_compile_sobolev(const std::string& target_name, int order, int dim, double eps,
                        double gamma, double delta_shift, const std::string& variant_name,
                        const std::string& out, std::string report_path) {
  const SmoothTarget& target = builtin_target(target_name);
  if (target.dim != dim) {
    throw std::invalid_argument("target '" + target_name + "' has dim " +
                                std::to_string(target.dim) + ", got --dim " +
                                std::to_string(dim));
  }
  const auto variant = bootstrap_variant_from_string(variant_name);
  const SobolevConfig config = SobolevConfig::make(order, dim, eps, gamma, delta_shift);
  const auto result = compile_sobolev(target, config, variant);

  ordered_json meta;
  meta["kind"] = "sobolev";
  meta["target"] = target_name;
  meta["order"] = order;
  meta["dim"] = dim;
  meta["eps"] = eps;
  meta["gamma"] = gamma;
  meta["delta_shift"] = delta_shift;
  meta["bootstrap"] = to_string(variant);
  meta["layout"] = layout_json(result.layout);
  save_schedule(out, result.schedule, meta);

  ordered_json rep;
  rep["N"] = config.params.N;
  rep["delta"] = config.params.delta;
  rep["c"] = config.params.sharpness;
  rep["W"] = result.schedule.width;
  rep["D"] = static_cast<int>(result.schedule.segments.size());
  rep["bound"] = result.bound;
  rep["worst_case_D"] = result.worst_case_segments;
  rep["terms_total"] = result.term_count_total;
  rep["terms_nonzero"] = result.term_count_nonzero;
  rep["bootstrap"] = to_string(variant);
  rep["warnings"] = result.warnings;
  if (report_path.empty()) report_path = default_report_path(out);
  write_json(report_path, rep);

  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "compiled '" << target_name << "' -> " << out << " (W=" << result.schedule.width
            << ", D=" << result.schedule.segments.size() << ", bound=" << result.bound << ")\n";
  return kExitPass;
}

// ---------------------------------------------------------------------------
// compile-ffnet

int cmd_compile_ffnet(const std::string& net_path, double eps, const std::string& out,
                      std::string report_path) {
  const FeedforwardNet net = FeedforwardNet::load(net_path);
  const auto result = compile_ffnet(net, eps);

  ordered_json meta;
  meta["kind"] = "ffnet";
  meta["net"] = net_path;
  meta["eps"] = eps;
  meta["block"] = result.block;
  save_schedule(out, result.schedule, meta);

  ordered_json rep;
  rep["K"] = result.budget.K;
  rep["a1"] = result.budget.a1;
  rep["a2"] = result.budget.a2;
  rep["a3"] = result.budget.a3;
  rep["delta0"] = result.budget.delta0;
  rep["W"] = result.schedule.width;
  rep["D"] = static_cast<int>(result.schedule.segments.size());
  ordered_json layers = ordered_json::array();
  for (std::size_t k = 0; k < result.budget.r1.size(); ++k) {
    ordered_json l;
    l["delta"] = result.budget.delta[k];
    l["step_bound"] = result.budget.step_bound[k];
    l["r1"] = result.budget.r1[k];
    l["r3"] = result.budget.r3[k];
    layers.push_back(std::move(l));
  }
  rep["layers"] = std::move(layers);
  rep["delta_final"] = result.budget.delta.back();
  if (report_path.empty()) report_path = default_report_path(out);
  write_json(report_path, rep);

  std::cout << "compiled net -> " << out << " (W=" << result.schedule.width
            << ", D=" << result.schedule.segments.size() << ")\n";
  return kExitPass;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const std::string& sched_path, const std::string& input_csv,
                 const std::string& traj_path, bool full, bool show_steps,
                 const IntegratorOptions& opts) {
  const auto file = load_schedule(sched_path);
  const auto x = parse_vector(input_csv);
  Trajectory traj;
  const auto result = simulate(file.schedule, x, opts, traj_path.empty() ? nullptr : &traj);
  std::cout << fmt17(result.output) << "\n";
  if (show_steps) {
    std::cerr << "accepted steps per segment:";
    for (const auto& st : result.segment_stats) std::cerr << " " << st.accepted;
    std::cerr << "\n";
  }
  if (!traj_path.empty()) {
    std::ofstream f(traj_path);
    if (!f) throw std::runtime_error("cannot open " + traj_path + " for writing");
    f << "t";
    for (int i = 0; i < file.schedule.width; ++i) f << ",y" << (i + 1);
    f << "\n";
    std::size_t stride = 1;
    if (!full && traj.times.size() > 10000) stride = (traj.times.size() + 9999) / 10000;
    for (std::size_t i = 0; i < traj.times.size(); i += stride) {
      f << fmt17(traj.times[i]);
      for (double v : traj.states[i]) f << "," << fmt17(v);
      f << "\n";
    }
  }
  return kExitPass;
}

// ---------------------------------------------------------------------------
// verify

int cmd_verify(const std::string& sched_path, std::string target_name, int order,
               const std::string& net_path, int grid, double eps_flag, double gamma,
               double delta_shift, const std::string& csv_path, const std::string& json_path,
               const IntegratorOptions& opts, int jobs) {
  const auto file = load_schedule(sched_path);
  VerificationReport rep;

  const std::string kind = file.meta.value("kind", "");
  if (!net_path.empty() || kind == "ffnet") {
    if (net_path.empty()) {
      throw std::invalid_argument("schedule was compiled from a net; pass --net <json>");
    }
    const FeedforwardNet net = FeedforwardNet::load(net_path);
    const double eps = eps_flag > 0 ? eps_flag : file.meta.value("eps", 0.0);
    if (!(eps > 0)) throw std::invalid_argument("pass --eps (not recorded in the schedule)");
    rep = verify_ffnet_grid(file.schedule, net, eps, grid, opts, jobs);
  } else {
    if (target_name.empty()) target_name = file.meta.value("target", "");
    if (target_name.empty()) {
      throw std::invalid_argument("pass --target <name> or --net <json>");
    }
    const SmoothTarget& target = builtin_target(target_name);
    if (order <= 0) order = file.meta.value("order", 0);
    double eps = eps_flag > 0 ? eps_flag : file.meta.value("eps", 0.0);
    gamma = file.meta.value("gamma", gamma);
    delta_shift = file.meta.value("delta_shift", delta_shift);
    if (order <= 0 || !(eps > 0)) {
      throw std::invalid_argument("pass --order and --eps (not recorded in the schedule)");
    }
    const SobolevConfig config = SobolevConfig::make(order, target.dim, eps, gamma, delta_shift);
    rep = verify_sobolev_grid(file.schedule, target, config, grid, 1e-5, opts, jobs);
  }

  if (!csv_path.empty()) write_report_csv(csv_path, rep);
  const ordered_json summary = report_summary(rep);
  if (!json_path.empty()) write_json(json_path, summary);
  std::cout << summary.dump(1) << "\n";
  return rep.pass ? kExitPass : kExitVerifyFail;
}

// ---------------------------------------------------------------------------
// check suites

struct CheckContext {
  unsigned long long seed = 7;
  int failures = 0;
  ordered_json results = ordered_json::array();

  void report(const std::string& name, bool pass, const std::string& detail,
              bool informational = false) {
    const char* tag = informational ? "INFO" : (pass ? "PASS" : "FAIL");
    std::cout << "[" << tag << "] " << name << ": " << detail << "\n";
    ordered_json r;
    r["name"] = name;
    r["status"] = tag;
    r["detail"] = detail;
    results.push_back(std::move(r));
    if (!pass && !informational) ++failures;
  }
};

void check_gadgets(CheckContext& ctx) {
  std::mt19937_64 rng(ctx.seed ^ 0x67616467ULL);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  IntegratorOptions opts;
  opts.rtol = 1e-12;  // the exponent flows reach |rate| ~ 70; headroom for 1e-8 targets
  opts.atol = 1e-14;

  double worst = 0.0;
  double witness[3] = {0, 0, 0};
  for (int t = 0; t < 1000; ++t) {
    const double a = u(rng), b = u(rng), xi = u(rng);
    const auto seg = tanh_gadget(a, b, {0, 1, 2});
    const std::vector<double> y0{xi, 0.0, 0.0};
    const auto y = integrate_segment(seg, y0, opts);
    const auto ref = tanh_closed_form(a, b, xi);
    const double err = std::max({std::abs(y[0] - ref.input), std::abs(y[1] - ref.output),
                                 std::abs(y[2] - ref.aux)});
    if (err > worst) {
      worst = err;
      witness[0] = a; witness[1] = b; witness[2] = xi;
    }
  }
  ctx.report("gadgets.tanh_flow", worst <= 1e-8,
             "1000 random (a,b,xi) in [-2,2]^3, max |flow - closed form| = " + fmt17(worst) +
                 " at (a,b,xi) = (" + fmt17(witness[0]) + ", " + fmt17(witness[1]) + ", " +
                 fmt17(witness[2]) + ")");

  std::uniform_real_distribution<double> uxi(0.01, 10.0);
  worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const double xi = uxi(rng);
    const auto seg = ln_gadget({0, 1});
    const std::vector<double> y0{xi - 1.0, 0.0};
    const auto y = integrate_segment(seg, y0, opts);
    worst = std::max(worst, std::abs(y[1] - std::log(xi)));
  }
  ctx.report("gadgets.ln_flow", worst <= 1e-7,
             "500 random xi in (0.01,10], max |log - ln(xi)| = " + fmt17(worst));

  worst = 0.0;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int t = 0; t < 400; ++t) {
    const int d = 1 + static_cast<int>(rng() % 5);
    std::vector<double> w(d), lnxi(d);
    double expect = 0.0;
    const double b = u(rng);
    for (int j = 0; j < d; ++j) {
      w[j] = u(rng);
      const double xi = std::max(u01(rng), 1e-3);
      lnxi[j] = std::log(xi);
      expect += w[j] * lnxi[j];
    }
    expect = std::exp(expect + b);
    MulGadgetSlots slots;
    for (int j = 0; j < d; ++j) slots.logs.push_back(j);
    slots.product = d;
    const auto seg = mul_gadget(w, b, slots);
    std::vector<double> y0(lnxi);
    y0.push_back(1.0);
    const auto y = integrate_segment(seg, y0, opts);
    worst = std::max(worst, std::abs(y[d] - expect) / std::abs(expect));
  }
  ctx.report("gadgets.mul_flow", worst <= 1e-8,
             "400 random (w,b,xi), d<=5, max relative error = " + fmt17(worst));

  // composition: per-coordinate logs then one product flow
  worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + static_cast<int>(rng() % 3);
    std::vector<double> w(d), xi(d);
    double expect = 0.0;
    for (int j = 0; j < d; ++j) {
      w[j] = u(rng);
      xi[j] = std::max(u01(rng), 0.05);
      expect += w[j] * std::log(xi[j]);
    }
    expect = std::exp(expect);
    ControlSchedule sched;
    sched.width = 2 * d + 1;
    sched.input_dim = d;
    ControlSegment shift;
    for (int j = 0; j < d; ++j) shift.add_constant(j, -1.0);
    shift.add_constant(2 * d, 1.0);
    sched.segments.push_back(shift);
    ControlSegment logs;
    for (int j = 0; j < d; ++j) {
      const auto g = ln_gadget({j, d + j});
      logs.linear.insert(logs.linear.end(), g.linear.begin(), g.linear.end());
      logs.quadratic.insert(logs.quadratic.end(), g.quadratic.begin(), g.quadratic.end());
    }
    sched.segments.push_back(logs);
    MulGadgetSlots slots;
    for (int j = 0; j < d; ++j) slots.logs.push_back(d + j);
    slots.product = 2 * d;
    sched.segments.push_back(mul_gadget(w, 0.0, slots));
    sched.readout = {{2 * d, 1.0}};
    const auto sim = simulate(sched, xi, opts);
    worst = std::max(worst, std::abs(sim.output - expect));
  }
  ctx.report("gadgets.log_then_product", worst <= 1e-7,
             "200 random monomials end-to-end, max |error| = " + fmt17(worst));
}

void check_bootstrap(CheckContext& ctx) {
  std::mt19937_64 rng(ctx.seed ^ 0x626f6f74ULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  IntegratorOptions tight;
  tight.rtol = 1e-12;
  tight.atol = 1e-14;

  double worst = 0.0;
  for (int N : {1, 3, 8}) {
    const PartitionParams p{N, 20.0};
    for (int t = 0; t < 1000; ++t) {
      const double x = u01(rng);
      double sum = 0.0;
      for (int k = 0; k <= N; ++k) sum += psi_eval(k, x, p);
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  }
  ctx.report("bootstrap.partition_of_unity", worst <= 1e-14,
             "N in {1,3,8}, 1000 x each, max |sum psi - 1| = " + fmt17(worst));

  worst = 0.0;
  for (double delta : {0.1, 0.025}) {
    for (int N : {3, 5}) {
      const PartitionParams p{N, PartitionParams::min_sharpness(N, delta)};
      for (int k = 0; k <= N; ++k) {
        const double lo = std::max(0.0, static_cast<double>(k - 1) / N);
        const double hi = std::min(1.0, static_cast<double>(k + 1) / N);
        for (int i = 0; i <= 2000; ++i) {
          const double x = i / 2000.0;
          if (x >= lo && x <= hi) continue;
          worst = std::max(worst, psi_eval(k, x, p) - delta);
        }
      }
    }
  }
  ctx.report("bootstrap.support_leak", worst <= 1e-12,
             "max psi outside approximate support minus delta = " + fmt17(worst));

  worst = 0.0;
  for (int N = 1; N <= 10; ++N) {
    const Eigen::MatrixXd e = matrix_exp(step2_matrix(N));
    Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(N + 1, N + 1);
    for (int k = 0; k <= N; ++k) {
      ref(k, k) = 0.5;
      if (k < N) ref(k, k + 1) = -0.5;
    }
    worst = std::max(worst, (e - ref).cwiseAbs().maxCoeff());
  }
  ctx.report("bootstrap.mix_matrix_exponential", worst <= 1e-12,
             "N <= 10, max |e^A - bidiagonal form| = " + fmt17(worst));

  // quadrature check of the bias: int_1^2 e^{(2-t)A} b dt = (0,..,0,1/2)
  worst = 0.0;
  for (int N : {1, 2, 5, 8}) {
    const Eigen::MatrixXd a = step2_matrix(N);
    const Eigen::VectorXd b = step2_bias(N);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(N + 1);
    const int panels = 64;  // Gauss-Legendre 4-point per panel
    const double gl_x[2] = {0.3399810435848563, 0.8611363115940526};
    const double gl_w[2] = {0.6521451548625461, 0.3478548451374538};
    for (int i = 0; i < panels; ++i) {
      const double lo = 1.0 + static_cast<double>(i) / panels;
      const double half = 0.5 / panels;
      const double mid = lo + half;
      for (int q = 0; q < 2; ++q) {
        for (double sgn : {-1.0, 1.0}) {
          const double t = mid + sgn * half * gl_x[q];
          acc += half * gl_w[q] * (matrix_exp((2.0 - t) * a) * b);
        }
      }
    }
    Eigen::VectorXd ref = Eigen::VectorXd::Zero(N + 1);
    ref(N) = 0.5;
    worst = std::max(worst, (acc - ref).cwiseAbs().maxCoeff());
  }
  ctx.report("bootstrap.bias_quadrature", worst <= 1e-10,
             "N in {1,2,5,8}, max |quadrature - (0,..,0,1/2)| = " + fmt17(worst));

  // mu residual probe on the as-displayed stage-2 drive
  {
    const PartitionParams p{2, 8.0};
    const auto boot = build_bootstrap(1, p, 1.0, BootstrapVariant::psi_chain);
    double residual = 0.0;
    for (int t = 0; t < 10; ++t) {
      const double x = u01(rng);
      std::vector<double> y = embed_input(std::vector<double>{x}, boot.layout.width());
      for (int s = 0; s < 2; ++s) y = integrate_segment(boot.segments[s], y, tight);
      for (int k = 1; k <= 2; ++k) {
        residual = std::max(residual, std::abs(y[boot.layout.mu_slot(0, k)]));
      }
    }
    ctx.report("bootstrap.psi_chain_stage2_mu", residual <= 1e-6,
               "max |mu| after stage 2 = " + fmt17(residual) +
                   (residual > 1e-6 ? " [known nonzero residual; compilers use the "
                                      "mu_fix/log_cosh variants]"
                                    : ""),
               /*informational=*/true);
  }

  // step fidelity of the repaired chain at conditioning-feasible sharpness
  worst = 0.0;
  for (int dim : {1, 2}) {
    for (int N : {2, 4}) {
      const PartitionParams p{N, N == 2 ? 4.0 : 3.5};
      const auto boot = build_bootstrap(dim, p, 1.0, BootstrapVariant::psi_chain_mu_fix);
      for (int t = 0; t < 12; ++t) {
        std::vector<double> x(dim);
        for (auto& xi : x) xi = u01(rng);
        std::vector<double> y = embed_input(x, boot.layout.width());
        for (int step = 1; step <= 7; ++step) {
          y = integrate_segment(boot.segments[boot.segments_through_step(step) - 1], y, tight);
          const auto ref = expected_state_after_step(step, x, p, 1.0, boot.layout);
          for (std::size_t i = 0; i < y.size(); ++i) {
            worst = std::max(worst, std::abs(y[i] - ref[i]));
          }
        }
      }
    }
  }
  ctx.report("bootstrap.step_fidelity_mu_fix", worst <= 1e-6,
             "d in {1,2}, N in {2,4}, per-step sup error = " + fmt17(worst));

  // shadow variant zeroes mu exactly and reaches the same terminal state
  worst = 0.0;
  double worst_mu = 0.0;
  {
    const PartitionParams p{3, 3.0};
    const auto boot = build_bootstrap(1, p, 1.0, BootstrapVariant::psi_chain_shadow);
    for (int t = 0; t < 10; ++t) {
      const double x = u01(rng);
      std::vector<double> y = embed_input(std::vector<double>{x}, boot.layout.width());
      y = integrate_segment(boot.segments[0], y, tight);
      y = integrate_segment(boot.segments[1], y, tight);  // reversal
      for (int k = 1; k <= 3; ++k) {
        worst_mu = std::max(worst_mu, std::abs(y[boot.layout.mu_slot(0, k)]));
      }
      for (std::size_t s = 2; s < boot.segments.size(); ++s) {
        y = integrate_segment(boot.segments[s], y, tight);
      }
      const auto ref = expected_state_after_step(7, std::vector<double>{x}, p, 1.0, boot.layout);
      for (std::size_t i = 0; i < y.size(); ++i) {
        worst = std::max(worst, std::abs(y[i] - ref[i]));
      }
    }
    ctx.report("bootstrap.shadow_reversal", worst_mu <= 1e-9 && worst <= 1e-6,
               "mu after reversal = " + fmt17(worst_mu) + ", terminal sup error = " +
                   fmt17(worst));
  }

  // log_cosh variant reaches the terminal state at compiled sharpness
  worst = 0.0;
  {
    const PartitionParams p{5, PartitionParams::min_sharpness(5, 0.025)};
    const auto boot = build_bootstrap(1, p, 1.0, BootstrapVariant::log_cosh);
    for (int t = 0; t < 10; ++t) {
      const double x = u01(rng);
      std::vector<double> y = embed_input(std::vector<double>{x}, boot.layout.width());
      for (const auto& seg : boot.segments) y = integrate_segment(seg, y, tight);
      const auto ref = expected_state_after_step(7, std::vector<double>{x}, p, 1.0, boot.layout);
      for (std::size_t i = 0; i < y.size(); ++i) {
        worst = std::max(worst, std::abs(y[i] - ref[i]));
      }
    }
    ctx.report("bootstrap.log_cosh_terminal", worst <= 1e-8,
               "N=5 at compiled sharpness, terminal sup error = " + fmt17(worst));
  }
}

void check_perturbation(CheckContext& ctx) {
  bool all_ok = true;
  std::string detail;
  for (double K : {0.5, 1.0}) {
    for (int mode = 0; mode < 3; ++mode) {
      const double thr = perturbation_threshold(K);
      const double delta = mode == 0 ? 1e-4 : (mode == 1 ? 1e-3 : 0.99 * thr);
      const auto rep = verify_perturbation_bound(K, delta, 500, ctx.seed);
      all_ok = all_ok && rep.violations == 0;
      char buf[224];
      if (rep.violations > 0 && rep.worst_case.size() == 4) {
        std::snprintf(buf, sizeof(buf),
                      "K=%.2f delta=%.3e ratio=%.3e VIOLATED at xi=%.6g eta=(%.3g,%.3g,%.3g); ",
                      K, delta, rep.max_ratio, rep.worst_case[0], rep.worst_case[1],
                      rep.worst_case[2], rep.worst_case[3]);
      } else {
        std::snprintf(buf, sizeof(buf), "K=%.2f delta=%.3e ratio=%.3e; ", K, delta,
                      rep.max_ratio);
      }
      detail += buf;
    }
  }
  ctx.report("perturbation.flow_bound", all_ok, "500 trials each: " + detail);
}

int cmd_check(const std::string& suite, unsigned long long seed, const std::string& json_path) {
  CheckContext ctx;
  ctx.seed = seed;
  const bool all = suite == "all";
  if (all || suite == "gadgets") check_gadgets(ctx);
  if (all || suite == "bootstrap") check_bootstrap(ctx);
  if (all || suite == "perturbation" || suite == "lemma5") check_perturbation(ctx);
  if (!json_path.empty()) write_json(json_path, ctx.results);
  std::cout << (ctx.failures == 0 ? "all checks passed" : std::to_string(ctx.failures) +
                " check(s) failed")
            << "\n";
  return ctx.failures == 0 ? kExitPass : kExitVerifyFail;
}

// ---------------------------------------------------------------------------
// gadget demo builder

int cmd_gadget(const std::string& kind, double a, double b, const std::string& weights_csv,
               double bias, const std::string& out) {
  ControlSchedule sched;
  ordered_json meta;
  meta["kind"] = "gadget";
  meta["gadget"] = kind;
  if (kind == "tanh") {
    sched.width = 3;
    sched.input_dim = 1;
    sched.segments.push_back(tanh_gadget(a, b, {0, 1, 2}));
    sched.readout = {{1, 1.0}};
    meta["a"] = a;
    meta["b"] = b;
  } else if (kind == "ln") {
    sched.width = 2;
    sched.input_dim = 1;
    ControlSegment shift;
    shift.add_constant(0, -1.0);
    sched.segments.push_back(shift);
    sched.segments.push_back(ln_gadget({0, 1}));
    sched.readout = {{1, 1.0}};
  } else if (kind == "mul") {
    const auto w = parse_vector(weights_csv);
    if (w.empty()) throw std::invalid_argument("gadget mul: pass --weights \"w1,w2,...\"");
    const int d = static_cast<int>(w.size());
    sched.width = 2 * d + 1;
    sched.input_dim = d;
    ControlSegment shift;
    for (int j = 0; j < d; ++j) shift.add_constant(j, -1.0);
    shift.add_constant(2 * d, 1.0);
    sched.segments.push_back(shift);
    ControlSegment logs;
    for (int j = 0; j < d; ++j) {
      const auto g = ln_gadget({j, d + j});
      logs.linear.insert(logs.linear.end(), g.linear.begin(), g.linear.end());
      logs.quadratic.insert(logs.quadratic.end(), g.quadratic.begin(), g.quadratic.end());
    }
    sched.segments.push_back(logs);
    MulGadgetSlots slots;
    for (int j = 0; j < d; ++j) slots.logs.push_back(d + j);
    slots.product = 2 * d;
    sched.segments.push_back(mul_gadget(w, bias, slots));
    sched.readout = {{2 * d, 1.0}};
    meta["weights"] = w;
    meta["bias"] = bias;
  } else {
    throw std::invalid_argument("gadget kind must be tanh, ln or mul");
  }
  sched.validate();
  save_schedule(out, sched, meta);
  std::cout << "wrote " << kind << " gadget schedule to " << out << "\n";
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qode: compile and simulate piecewise-constant quadratic ODE schedules"};
  app.require_subcommand(1);

  IntegratorOptions tol = env_default_tolerances();

  // compile-sobolev
  std::string cs_target, cs_out, cs_report, cs_variant = "log_cosh";
  int cs_order = 2, cs_dim = 1;
  double cs_eps = 0.0, cs_gamma = 0.5, cs_shift = 1.0;
  auto* cs = app.add_subcommand("compile-sobolev",
                                "Compile a builtin smooth target into a schedule");
  cs->add_option("--target", cs_target, "builtin target name")->required();
  cs->add_option("--order", cs_order, "smoothness order n")->check(CLI::PositiveNumber);
  cs->add_option("--dim", cs_dim, "input dimension d")->check(CLI::PositiveNumber);
  cs->add_option("--eps", cs_eps, "target sup error")->required()->check(CLI::PositiveNumber);
  cs->add_option("--gamma", cs_gamma, "error split in (0,1)")
      ->check(CLI::Range(std::nextafter(0.0, 1.0), 1.0, "(0,1)"));
  cs->add_option("--delta-shift", cs_shift, "log-domain shift Delta > 0")
      ->check(CLI::PositiveNumber);
  cs->add_option("--bootstrap", cs_variant,
                 "bootstrap variant: log_cosh | psi_chain_mu_fix | psi_chain_shadow");
  cs->add_option("--out", cs_out, "schedule output path")->required();
  cs->add_option("--report", cs_report, "sidecar report path (default <out>.report.json)");

  // compile-ffnet
  std::string cf_net, cf_out, cf_report;
  double cf_eps = 0.0;
  auto* cf = app.add_subcommand("compile-ffnet", "Compile a tanh feedforward net JSON");
  cf->add_option("--net", cf_net, "net JSON path")->required();
  cf->add_option("--eps", cf_eps, "target sup error")->required()->check(CLI::PositiveNumber);
  cf->add_option("--out", cf_out, "schedule output path")->required();
  cf->add_option("--report", cf_report, "sidecar report path");

  // simulate
  std::string sim_sched, sim_input, sim_traj;
  bool sim_full = false, sim_steps = false;
  auto* sim = app.add_subcommand("simulate", "Integrate a schedule for one input");
  sim->add_option("--schedule", sim_sched, "schedule JSON")->required();
  sim->add_option("--input", sim_input, "comma-separated input vector")->required();
  sim->add_option("--trajectory", sim_traj, "write trajectory CSV here");
  sim->add_flag("--full", sim_full, "do not downsample the trajectory");
  sim->add_flag("--steps", sim_steps, "print accepted steps per segment to stderr");
  sim->add_option("--rtol", tol.rtol, "relative tolerance");
  sim->add_option("--atol", tol.atol, "absolute tolerance");

  // verify
  std::string v_sched, v_target, v_net, v_csv, v_json;
  int v_grid = 21, v_order = 0, v_jobs = 0;
  double v_eps = 0.0, v_gamma = 0.5, v_shift = 1.0;
  auto* ver = app.add_subcommand("verify", "Grid-verify a schedule against its reference");
  ver->add_option("--schedule", v_sched)->required();
  ver->add_option("--target", v_target, "builtin target (default: schedule meta)");
  ver->add_option("--order", v_order, "smoothness order (default: schedule meta)");
  ver->add_option("--net", v_net, "net JSON (for ffnet schedules)");
  ver->add_option("--grid", v_grid, "points per dimension")->check(CLI::Range(2, 100000));
  ver->add_option("--eps", v_eps, "pass threshold (default: schedule meta)");
  ver->add_option("--gamma", v_gamma);
  ver->add_option("--delta-shift", v_shift);
  ver->add_option("--out-csv", v_csv, "per-point CSV path");
  ver->add_option("--out-json", v_json, "summary JSON path");
  ver->add_option("--jobs", v_jobs, "parallel workers (0 = hardware)");
  ver->add_option("--rtol", tol.rtol);
  ver->add_option("--atol", tol.atol);

  // check
  std::string ck_suite = "all", ck_json;
  unsigned long long ck_seed = 7;
  auto* ck = app.add_subcommand("check", "Run the property suites");
  ck->add_option("--suite", ck_suite, "gadgets | bootstrap | perturbation | all");
  ck->add_option("--seed", ck_seed, "rng seed");
  ck->add_option("--json", ck_json, "machine-readable results path");

  // gadget
  std::string g_kind, g_out, g_weights;
  double g_a = 1.0, g_b = 0.0, g_bias = 0.0;
  auto* gd = app.add_subcommand("gadget", "Emit a demo gadget schedule");
  gd->add_option("--kind", g_kind, "tanh | ln | mul")->required();
  gd->add_option("--a", g_a, "tanh gain");
  gd->add_option("--b", g_b, "tanh offset");
  gd->add_option("--weights", g_weights, "mul exponents, comma-separated");
  gd->add_option("--bias", g_bias, "mul bias");
  gd->add_option("--out", g_out, "schedule output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message/help
    return e.get_exit_code() == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (cs->parsed()) {
      return cmd_compile_sobolev(cs_target, cs_order, cs_dim, cs_eps, cs_gamma, cs_shift,
                                 cs_variant, cs_out, cs_report);
    }
    if (cf->parsed()) return cmd_compile_ffnet(cf_net, cf_eps, cf_out, cf_report);
    if (sim->parsed()) return cmd_simulate(sim_sched, sim_input, sim_traj, sim_full, sim_steps, tol);
    if (ver->parsed()) {
      return cmd_verify(v_sched, v_target, v_order, v_net, v_grid, v_eps, v_gamma, v_shift,
                        v_csv, v_json, tol, v_jobs);
    }
    if (ck->parsed()) return cmd_check(ck_suite, ck_seed, ck_json);
    if (gd->parsed()) return cmd_gadget(g_kind, g_a, g_b, g_weights, g_bias, g_out);
  } catch (const IntegrationFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerifyFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
