#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qode/bootstrap.hpp"
#include "qode/ffnet.hpp"
#include "qode/gadgets.hpp"
#include "qode/schedule_io.hpp"
#include "qode/simulate.hpp"
#include "qode/sobolev.hpp"
#include "qode/targets.hpp"
#include "qode/verify.hpp"

namespace py = pybind11;
using namespace qode;

namespace {

IntegratorOptions make_opts(double rtol, double atol) {
  IntegratorOptions o;
  o.rtol = rtol;
  o.atol = atol;
  return o;
}

py::dict summary_to_dict(const VerificationReport& rep) {
  py::dict d;
  d["grid"] = rep.grid;
  d["points"] = rep.points.size();
  d["sup_math"] = rep.sup_math;
  d["sup_realization"] = rep.sup_realization;
  d["sup_total"] = rep.sup_total;
  d["bound"] = rep.bound;
  d["eps"] = rep.eps;
  d["failures"] = rep.failures;
  d["pass"] = rep.pass;
  return d;
}

}  // namespace

PYBIND11_MODULE(_qode, m) {
  m.doc() = "Piecewise-constant quadratic ODE schedules: compile, simulate, verify";

  py::register_exception<InvalidSchedule>(m, "InvalidScheduleError");
  py::register_exception<IntegrationFailure>(m, "IntegrationFailureError");
  py::register_exception<BudgetInfeasible>(m, "BudgetInfeasibleError");

  py::class_<ControlSchedule>(m, "Schedule")
      .def_readonly("width", &ControlSchedule::width)
      .def_readonly("input_dim", &ControlSchedule::input_dim)
      .def_property_readonly(
          "segments", [](const ControlSchedule& s) { return s.segments.size(); })
      .def("total_duration", &ControlSchedule::total_duration)
      .def("to_json", [](const ControlSchedule& s) { return schedule_to_json(s).dump(); })
      .def_static("from_json",
                  [](const std::string& text) {
                    return schedule_from_json(nlohmann::json::parse(text));
                  })
      .def_static("load", [](const std::string& p) { return load_schedule(p).schedule; })
      .def("save",
           [](const ControlSchedule& s, const std::string& p) {
             save_schedule(p, s);
           })
      .def("simulate",
           [](const ControlSchedule& s, const std::vector<double>& x, double rtol, double atol) {
             return simulate(s, x, make_opts(rtol, atol)).output;
           },
           py::arg("x"), py::arg("rtol") = 1e-10, py::arg("atol") = 1e-12)
      .def("simulate_with_steps",
           [](const ControlSchedule& s, const std::vector<double>& x, double rtol, double atol) {
             const auto r = simulate(s, x, make_opts(rtol, atol));
             std::vector<std::size_t> steps;
             for (const auto& st : r.segment_stats) steps.push_back(st.accepted);
             return py::make_tuple(r.output, steps);
           },
           py::arg("x"), py::arg("rtol") = 1e-10, py::arg("atol") = 1e-12)
      .def("rescale", &rescale_schedule, py::arg("new_duration"));

  m.def("embed_input",
        [](const std::vector<double>& x, int width) { return embed_input(x, width); });

  m.def("tanh_closed_form", [](double a, double b, double xi) {
    const auto r = tanh_closed_form(a, b, xi);
    return py::make_tuple(r.input, r.output, r.aux);
  });

  m.def("psi_eval", [](int k, double x, int N, double sharpness) {
    return psi_eval(k, x, {N, sharpness});
  });
  m.def("log_psi_eval", [](int k, double x, int N, double sharpness) {
    return log_psi_eval(k, x, {N, sharpness});
  });
  m.def("min_sharpness", &PartitionParams::min_sharpness);

  m.def("choose_parameters", [](int order, int dim, double eps, double gamma) {
    const auto p = choose_parameters(order, dim, eps, gamma);
    return py::make_tuple(p.N, p.delta, p.sharpness);
  });
  m.def("error_bound", &error_bound);

  m.def("builtin_targets", &builtin_target_names);

  m.def(
      "compile_sobolev",
      [](const std::string& target, int order, double eps, double gamma, double delta_shift,
         const std::string& variant) {
        const SmoothTarget& t = builtin_target(target);
        const auto config = SobolevConfig::make(order, t.dim, eps, gamma, delta_shift);
        const auto res = compile_sobolev(t, config, bootstrap_variant_from_string(variant));
        py::dict info;
        info["N"] = config.params.N;
        info["delta"] = config.params.delta;
        info["c"] = config.params.sharpness;
        info["W"] = res.schedule.width;
        info["D"] = res.schedule.segments.size();
        info["bound"] = res.bound;
        info["terms_nonzero"] = res.term_count_nonzero;
        info["worst_case_D"] = res.worst_case_segments;
        return py::make_tuple(res.schedule, info);
      },
      py::arg("target"), py::arg("order"), py::arg("eps"), py::arg("gamma") = 0.5,
      py::arg("delta_shift") = 1.0, py::arg("variant") = "log_cosh");

  m.def(
      "direct_eval",
      [](const std::string& target, int order, double eps, double gamma, double delta_shift,
         const std::vector<double>& x) {
        const SmoothTarget& t = builtin_target(target);
        const auto config = SobolevConfig::make(order, t.dim, eps, gamma, delta_shift);
        return direct_fhat_eval(t, config, x);
      },
      py::arg("target"), py::arg("order"), py::arg("eps"), py::arg("gamma") = 0.5,
      py::arg("delta_shift") = 1.0, py::arg("x") = std::vector<double>{});

  m.def("target_value", [](const std::string& target, const std::vector<double>& x) {
    return builtin_target(target).value(x);
  });

  m.def(
      "compile_ffnet",
      [](const std::string& net_json, double eps) {
        const auto net = FeedforwardNet::from_json(nlohmann::json::parse(net_json));
        const auto res = compile_ffnet(net, eps);
        py::dict info;
        info["K"] = res.budget.K;
        info["delta0"] = res.budget.delta0;
        info["W"] = res.schedule.width;
        info["D"] = res.schedule.segments.size();
        info["r1"] = res.budget.r1;
        info["r3"] = res.budget.r3;
        return py::make_tuple(res.schedule, info);
      },
      py::arg("net_json"), py::arg("eps"));

  m.def("net_eval", [](const std::string& net_json, const std::vector<double>& x) {
    return net_eval(FeedforwardNet::from_json(nlohmann::json::parse(net_json)), x);
  });

  m.def("perturbation_bound", &perturbation_bound);
  m.def("perturbation_threshold", &perturbation_threshold);
  m.def(
      "verify_perturbation",
      [](double K, double delta, int trials, unsigned long long seed) {
        const auto rep = verify_perturbation_bound(K, delta, trials, seed);
        py::dict d;
        d["bound"] = rep.bound;
        d["max_deviation"] = rep.max_deviation;
        d["max_ratio"] = rep.max_ratio;
        d["violations"] = rep.violations;
        return d;
      },
      py::arg("K"), py::arg("delta"), py::arg("trials") = 100, py::arg("seed") = 0);

  m.def(
      "verify_sobolev",
      [](const ControlSchedule& sched, const std::string& target, int order, double eps,
         double gamma, double delta_shift, int grid) {
        const SmoothTarget& t = builtin_target(target);
        const auto config = SobolevConfig::make(order, t.dim, eps, gamma, delta_shift);
        return summary_to_dict(verify_sobolev_grid(sched, t, config, grid));
      },
      py::arg("schedule"), py::arg("target"), py::arg("order"), py::arg("eps"),
      py::arg("gamma") = 0.5, py::arg("delta_shift") = 1.0, py::arg("grid") = 21);

  m.def(
      "verify_ffnet",
      [](const ControlSchedule& sched, const std::string& net_json, double eps, int grid) {
        const auto net = FeedforwardNet::from_json(nlohmann::json::parse(net_json));
        return summary_to_dict(verify_ffnet_grid(sched, net, eps, grid));
      },
      py::arg("schedule"), py::arg("net_json"), py::arg("eps"), py::arg("grid") = 21);
}
