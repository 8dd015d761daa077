#include "qode/ffnet.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "qode/gadgets.hpp"
#include "qode/integrate.hpp"

namespace qode {

void FeedforwardNet::validate() const {
  if (input_dim < 1) throw std::invalid_argument("net: input_dim must be >= 1");
  if (width < 1) throw std::invalid_argument("net: width must be >= 1");
  if (layers.empty()) throw std::invalid_argument("net: at least one layer required");
  if (!(weight_bound > 0.0)) throw std::invalid_argument("net: weight_bound must be positive");
  if (readout.size() != width) {
    throw std::invalid_argument("net: readout length != width");
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.weights.rows() != width || l.weights.cols() != width || l.bias.size() != width) {
      throw std::invalid_argument("net: layer " + std::to_string(k + 1) +
                                  " dimensions inconsistent with width");
    }
    const double m = std::max(l.weights.cwiseAbs().maxCoeff(), l.bias.cwiseAbs().maxCoeff());
    if (m > weight_bound * (1.0 + 1e-12)) {
      throw std::invalid_argument("net: layer " + std::to_string(k + 1) + " has a weight of " +
                                  std::to_string(m) + " exceeding weight_bound " +
                                  std::to_string(weight_bound));
    }
  }
}

FeedforwardNet FeedforwardNet::from_json(const nlohmann::json& j) {
  FeedforwardNet net;
  try {
    net.input_dim = j.at("input_dim").get<int>();
    net.width = j.at("width").get<int>();
    net.weight_bound = j.at("weight_bound").get<double>();
    for (const auto& lj : j.at("layers")) {
      Layer l;
      const auto& a = lj.at("A");
      l.weights.resize(net.width, net.width);
      for (int r = 0; r < net.width; ++r) {
        for (int c = 0; c < net.width; ++c) l.weights(r, c) = a.at(r).at(c).get<double>();
      }
      l.bias.resize(net.width);
      for (int r = 0; r < net.width; ++r) l.bias(r) = lj.at("b").at(r).get<double>();
      net.layers.push_back(std::move(l));
    }
    const auto& ro = j.at("readout");
    net.readout.resize(net.width);
    for (int r = 0; r < net.width; ++r) net.readout(r) = ro.at(r).get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed net JSON: ") + e.what());
  }
  net.validate();
  return net;
}

nlohmann::ordered_json FeedforwardNet::to_json() const {
  nlohmann::ordered_json j;
  j["input_dim"] = input_dim;
  j["width"] = width;
  nlohmann::ordered_json layers_j = nlohmann::ordered_json::array();
  for (const auto& l : layers) {
    nlohmann::ordered_json lj;
    auto a = nlohmann::ordered_json::array();
    for (int r = 0; r < width; ++r) {
      auto row = nlohmann::ordered_json::array();
      for (int c = 0; c < width; ++c) row.push_back(l.weights(r, c));
      a.push_back(std::move(row));
    }
    lj["A"] = std::move(a);
    auto b = nlohmann::ordered_json::array();
    for (int r = 0; r < width; ++r) b.push_back(l.bias(r));
    lj["b"] = std::move(b);
    layers_j.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers_j);
  auto ro = nlohmann::ordered_json::array();
  for (int r = 0; r < width; ++r) ro.push_back(readout(r));
  j["readout"] = std::move(ro);
  j["weight_bound"] = weight_bound;
  return j;
}

FeedforwardNet FeedforwardNet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("cannot parse " + path + ": " + e.what());
  }
  return from_json(j);
}

namespace {

int block_size(const FeedforwardNet& net) { return std::max(net.width, net.input_dim); }

Eigen::VectorXd pad_input(const FeedforwardNet& net, std::span<const double> x) {
  if (static_cast<int>(x.size()) != net.input_dim) {
    throw std::invalid_argument("net input has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(net.input_dim));
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(block_size(net));
  for (std::size_t i = 0; i < x.size(); ++i) z(static_cast<int>(i)) = x[i];
  return z;
}

}  // namespace

std::vector<Eigen::VectorXd> net_eval_states(const FeedforwardNet& net,
                                             std::span<const double> x) {
  const int P = block_size(net);
  std::vector<Eigen::VectorXd> zs;
  zs.push_back(pad_input(net, x));
  for (const auto& l : net.layers) {
    Eigen::VectorXd pre = Eigen::VectorXd::Zero(P);
    pre.head(net.width) = l.weights * zs.back().head(net.width) + l.bias;
    zs.push_back(pre.array().tanh().matrix());
  }
  return zs;
}

double net_eval(const FeedforwardNet& net, std::span<const double> x) {
  const auto zs = net_eval_states(net, x);
  return net.readout.dot(zs.back().head(net.width));
}

double perturbation_threshold(double K) {
  const double a3 = 4.0 * K + 2.0;
  return a3 / (9.0 * std::expm1(a3));
}

double perturbation_bound(double K, double delta) {
  if (K < 0.0 || delta < 0.0) throw std::invalid_argument("perturbation_bound: negative input");
  const double a3 = 4.0 * K + 2.0;
  const double denom = a3 - 9.0 * std::expm1(a3) * delta;
  if (!(denom > 0.0)) {
    throw BudgetInfeasible("perturbation_bound: delta " + std::to_string(delta) +
                           " is not below the admissible threshold " +
                           std::to_string(perturbation_threshold(K)) + " for K = " +
                           std::to_string(K));
  }
  return a3 * std::exp(a3) * delta / denom;
}

namespace {

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

LayerBudget budget(const FeedforwardNet& net, double eps) {
  net.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("budget: eps must be positive");
  const int D = net.depth();
  LayerBudget bud;
  bud.K = net.weight_bound * (net.width + 1);
  const double a3 = 4.0 * bud.K + 2.0;
  const double log_a3 = std::log(a3);
  const double log_K = std::log(bud.K);
  const double log_a1 = log_a3 + a3 + log_K;
  const double log_a2 = std::log(9.0) + log_K + a3 + std::log1p(-std::exp(-a3));
  const double log_a1pa3 = log_add_exp(log_a1, log_a3);
  bud.a1 = std::exp(log_a1);
  bud.a2 = std::exp(log_a2);
  bud.a3 = a3;

  const double log_c1 = std::log(net.readout.cwiseAbs().sum());
  // delta0 = a3^D eps / (a1^D |c|_1 + a2 (a1+a3)^D eps), in log space
  double log_delta0 = D * log_a3 + std::log(eps) -
                      log_add_exp(D * log_a1 + log_c1, log_a2 + D * log_a1pa3 + std::log(eps));

  const double log_threshold = log_a3 - log_a2;  // admissibility: delta_k < a3/a2
  const double mw1 = net.weight_bound * net.width + 1.0;

  for (int attempt = 0;; ++attempt) {
    if (attempt > 200) throw BudgetInfeasible("budget: cannot satisfy per-layer admissibility");
    bool ok = true;
    std::vector<double> log_delta{log_delta0};
    for (int k = 0; k < D; ++k) {
      if (!(log_delta.back() < log_threshold)) {
        ok = false;
        break;
      }
      const double t = std::exp(log_a2 + log_delta.back());  // a2 * delta_k < a3 here
      const double log_step =
          log_a1 + log_delta.back() - std::log(a3 - t);  // Delta_k
      log_delta.push_back(log_step);
    }
    if (ok) {
      bud.delta0 = std::exp(log_delta0);
      if (bud.delta0 == 0.0) {
        throw BudgetInfeasible(
            "budget: delta0 underflows double precision; reduce the depth or the weight bound");
      }
      for (int k = 0; k <= D; ++k) bud.delta.push_back(std::exp(log_delta[k]));
      for (int k = 0; k < D; ++k) {
        bud.step_bound.push_back(bud.delta[k + 1]);
        // r1 = -ln((M W + 1) delta_k / (1 + delta_k))
        bud.r1.push_back(-(std::log(mw1) + log_delta[k] - std::log1p(bud.delta[k])));
        // r3 = -ln(Delta_k / (K + Delta_k))
        bud.r3.push_back(-(log_delta[k + 1] - std::log(bud.K + bud.delta[k + 1])));
      }
      return bud;
    }
    log_delta0 -= std::log(2.0);
  }
}

ControlSegment tanh_activation_step(int block) {
  ControlSegment seg;
  for (int j = 0; j < block; ++j) {
    const int alpha = j, lambda = block + j, mu = 2 * block + j;
    seg.add_linear(alpha, mu, 1.0);
    seg.add_quadratic(alpha, alpha, lambda, -1.0);
    seg.add_quadratic(lambda, mu, mu, 1.0);
    seg.add_quadratic(lambda, lambda, lambda, -1.0);
  }
  return seg;
}

FfnetCompileResult compile_ffnet(const FeedforwardNet& net, double eps,
                                 const ActivationStep& activation) {
  FfnetCompileResult res;
  res.budget = budget(net, eps);
  const int P = block_size(net);
  res.block = P;

  ControlSchedule sched;
  sched.width = 3 * P;
  sched.input_dim = net.input_dim;
  auto alpha = [&](int j) { return j; };
  auto lambda = [&](int j) { return P + j; };
  auto mu = [&](int j) { return 2 * P + j; };

  for (int k = 0; k < net.depth(); ++k) {
    const double r1 = res.budget.r1[k];
    const double r3 = res.budget.r3[k];
    const double load_gain = r1 / (-std::expm1(-r1));  // r1 / (1 - e^{-r1})

    ControlSegment s1;  // decay alpha, deposit A alpha + b into mu
    for (int j = 0; j < P; ++j) s1.add_linear(alpha(j), alpha(j), -r1);
    for (int i = 0; i < net.width; ++i) {
      for (int j = 0; j < net.width; ++j) {
        s1.add_linear(mu(i), alpha(j), load_gain * net.layers[k].weights(i, j));
      }
      s1.add_constant(mu(i), net.layers[k].bias(i));
    }
    sched.segments.push_back(std::move(s1));

    sched.segments.push_back(activation(P));

    ControlSegment s3;  // cleanup
    for (int j = 0; j < P; ++j) {
      s3.add_linear(lambda(j), lambda(j), -r3);
      s3.add_linear(mu(j), mu(j), -r3);
    }
    sched.segments.push_back(std::move(s3));
  }

  for (int j = 0; j < net.width; ++j) {
    if (net.readout(j) != 0.0) sched.readout.push_back({alpha(j), net.readout(j)});
  }
  sched.validate();
  res.schedule = std::move(sched);
  return res;
}

PerturbationReport verify_perturbation_bound(double K, double delta, int trials,
                                             unsigned long long seed) {
  PerturbationReport rep;
  rep.trials = trials;
  rep.bound = perturbation_bound(K, delta);
  const ControlSegment seg = tanh_gadget(1.0, 0.0, {0, 1, 2});
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  IntegratorOptions opts;
  for (int t = 0; t < trials; ++t) {
    const double xi = K * u(rng);
    const double e1 = delta * u(rng), e2 = delta * u(rng), e3 = delta * u(rng);
    const std::vector<double> base{xi, 0.0, 0.0};
    const std::vector<double> pert{xi + e1, e2, e3};
    const auto yb = integrate_segment(seg, base, opts);
    const auto yp = integrate_segment(seg, pert, opts);
    double dev = 0.0;
    for (int i = 0; i < 3; ++i) dev = std::max(dev, std::abs(yp[i] - yb[i]));
    rep.max_deviation = std::max(rep.max_deviation, dev);
    const double ratio = dev / rep.bound;
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.worst_case = {xi, e1, e2, e3};
    }
    if (dev > rep.bound) ++rep.violations;
  }
  return rep;
}

}  // namespace qode
