#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qode/ffnet.hpp"
#include "qode/simulate.hpp"

using namespace qode;

namespace {

FeedforwardNet demo_net() {
  FeedforwardNet net;
  net.input_dim = 2;
  net.width = 2;
  net.weight_bound = 0.5;
  FeedforwardNet::Layer l1, l2;
  l1.weights.resize(2, 2);
  l1.weights << 0.5, -0.3, 0.2, 0.4;
  l1.bias.resize(2);
  l1.bias << 0.1, -0.2;
  l2.weights.resize(2, 2);
  l2.weights << -0.4, 0.25, 0.5, -0.1;
  l2.bias.resize(2);
  l2.bias << 0.05, 0.3;
  net.layers = {l1, l2};
  net.readout.resize(2);
  net.readout << 1.0, -0.5;
  return net;
}

FeedforwardNet random_net(std::mt19937_64& rng, int width, int depth, double bound) {
  std::uniform_real_distribution<double> u(-bound, bound);
  FeedforwardNet net;
  net.input_dim = width;
  net.width = width;
  net.weight_bound = bound;
  for (int k = 0; k < depth; ++k) {
    FeedforwardNet::Layer l;
    l.weights.resize(width, width);
    l.bias.resize(width);
    for (int i = 0; i < width; ++i) {
      l.bias(i) = u(rng);
      for (int j = 0; j < width; ++j) l.weights(i, j) = u(rng);
    }
    net.layers.push_back(std::move(l));
  }
  net.readout.resize(width);
  for (int i = 0; i < width; ++i) net.readout(i) = u(rng);
  return net;
}

}  // namespace

TEST_CASE("net_eval") {
  SUBCASE("zero weights give zero output") {
    FeedforwardNet net;
    net.input_dim = 2;
    net.width = 2;
    net.weight_bound = 0.5;
    FeedforwardNet::Layer l;
    l.weights = Eigen::MatrixXd::Zero(2, 2);
    l.bias = Eigen::VectorXd::Zero(2);
    net.layers = {l};
    net.readout.resize(2);
    net.readout << 1.0, 1.0;
    CHECK(net_eval(net, std::vector<double>{0.3, 0.9}) == 0.0);
  }
  SUBCASE("single identity layer") {
    FeedforwardNet net;
    net.input_dim = 2;
    net.width = 2;
    net.weight_bound = 1.0;
    FeedforwardNet::Layer l;
    l.weights = Eigen::MatrixXd::Identity(2, 2);
    l.bias = Eigen::VectorXd::Zero(2);
    net.layers = {l};
    net.readout.resize(2);
    net.readout << 1.0, 0.0;
    CHECK(net_eval(net, std::vector<double>{0.5, 0.0}) ==
          doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
  }
  SUBCASE("agrees with an independent recurrence") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
      const auto net = random_net(rng, 3, 3, 0.6);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> x{u(rng), u(rng), u(rng)};
      // plain loop, no Eigen
      std::vector<double> z(x);
      for (const auto& l : net.layers) {
        std::vector<double> nz(3);
        for (int i = 0; i < 3; ++i) {
          double acc = l.bias(i);
          for (int j = 0; j < 3; ++j) acc += l.weights(i, j) * z[j];
          nz[i] = std::tanh(acc);
        }
        z = nz;
      }
      double out = 0.0;
      for (int i = 0; i < 3; ++i) out += net.readout(i) * z[i];
      CHECK(net_eval(net, x) == doctest::Approx(out).epsilon(1e-12));
    }
  }
}

TEST_CASE("net validation") {
  auto net = demo_net();
  CHECK_NOTHROW(net.validate());
  SUBCASE("weight beyond the bound") {
    net.layers[0].weights(0, 0) = 0.7;
    CHECK_THROWS_AS(net.validate(), std::invalid_argument);
  }
  SUBCASE("bound must be positive") {
    net.weight_bound = 0.0;
    CHECK_THROWS_AS(net.validate(), std::invalid_argument);
  }
  SUBCASE("readout length") {
    net.readout.resize(3);
    CHECK_THROWS_AS(net.validate(), std::invalid_argument);
  }
}

TEST_CASE("net JSON round trip") {
  const auto net = demo_net();
  const auto j = net.to_json();
  const auto back = FeedforwardNet::from_json(j);
  CHECK(back.width == 2);
  CHECK(back.layers[1].weights(1, 0) == 0.5);
  CHECK(back.readout(1) == -0.5);
  CHECK_THROWS_AS(FeedforwardNet::from_json(nlohmann::json{{"width", 2}}),
                  std::invalid_argument);
}

TEST_CASE("perturbation_bound") {
  CHECK(perturbation_bound(1.0, 0.0) == 0.0);
  SUBCASE("K = 0 reference value") {
    // 2 e^2 0.01 / (2 - 9 (e^2 - 1) 0.01), evaluated independently
    const double e2 = std::exp(2.0);
    const double want = (2.0 * e2 * 0.01) / (2.0 - 9.0 * (e2 - 1.0) * 0.01);
    CHECK(want == doctest::Approx(0.10370715).epsilon(1e-7));
    CHECK(perturbation_bound(0.0, 0.01) == doctest::Approx(want).epsilon(1e-15));
  }
  SUBCASE("at least the exponential envelope") {
    for (double K : {0.0, 0.5, 1.0}) {
      for (double d : {1e-6, 1e-4}) {
        CHECK(perturbation_bound(K, d) >= std::exp(4.0 * K + 2.0) * d);
      }
    }
  }
  SUBCASE("admissibility threshold") {
    const double thr = perturbation_threshold(1.0);
    CHECK(std::isfinite(perturbation_bound(1.0, 0.99 * thr)));
    CHECK_THROWS_AS(perturbation_bound(1.0, 1.01 * thr), BudgetInfeasible);
  }
}

TEST_CASE("verify_perturbation_bound") {
  SUBCASE("zero perturbation deviates by integration error only") {
    const auto rep = verify_perturbation_bound(1.0, 0.0, 3, 1);
    CHECK(rep.max_deviation <= 1e-9);
  }
  SUBCASE("random trials stay within the bound") {
    const auto rep = verify_perturbation_bound(1.0, 1e-4, 200, 7);
    CHECK(rep.violations == 0);
    CHECK(rep.max_ratio <= 1.0);
    CHECK(rep.max_ratio > 0.0);
  }
  SUBCASE("near the admissibility threshold the bound is loose but holds") {
    const double thr = perturbation_threshold(0.5);
    const auto rep = verify_perturbation_bound(0.5, 0.99 * thr, 100, 7);
    CHECK(rep.violations == 0);
  }
}

TEST_CASE("budget") {
  const auto net = demo_net();
  const auto bud = budget(net, 1e-2);
  CHECK(bud.K == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(bud.a3 == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(bud.a1 == doctest::Approx(8.0 * std::exp(8.0) * 1.5).epsilon(1e-12));
  CHECK(bud.a2 == doctest::Approx(9.0 * (std::exp(8.0) - 1.0) * 1.5).epsilon(1e-12));
  SUBCASE("final budget is below eps / |readout|_1") {
    CHECK(bud.delta.back() <= 1e-2 / 1.5 + 1e-18);
  }
  SUBCASE("per-layer deltas grow") {
    for (std::size_t k = 0; k + 1 < bud.delta.size(); ++k) CHECK(bud.delta[k + 1] > bud.delta[k]);
  }
  SUBCASE("gains are finite and positive") {
    for (double r : bud.r1) CHECK((std::isfinite(r) && r > 0.0));
    for (double r : bud.r3) CHECK((std::isfinite(r) && r > 0.0));
  }
  SUBCASE("deep stiff nets are reported infeasible") {
    std::mt19937_64 rng(3);
    auto big = random_net(rng, 4, 40, 2.0);  // K = 10, a1 ~ 7e20: delta0 underflows
    CHECK_THROWS_AS(budget(big, 1e-2), BudgetInfeasible);
  }
}

TEST_CASE("compile_ffnet shapes") {
  const auto net = demo_net();
  const auto res = compile_ffnet(net, 1e-2);
  CHECK(res.schedule.width == 6);
  CHECK(res.schedule.segments.size() == 6);
  SUBCASE("shape does not depend on eps") {
    const auto res2 = compile_ffnet(net, 1e-3);
    CHECK(res2.schedule.width == res.schedule.width);
    CHECK(res2.schedule.segments.size() == res.schedule.segments.size());
    CHECK(res2.budget.r1[0] > res.budget.r1[0]);  // only the gains move
  }
  SUBCASE("width uses max(net width, input dim)") {
    std::mt19937_64 rng(5);
    auto wide = random_net(rng, 3, 2, 0.4);
    wide.input_dim = 2;  // narrower input than the net body
    const auto r2 = compile_ffnet(wide, 1e-2);
    CHECK(r2.schedule.width == 9);
    CHECK(r2.schedule.input_dim == 2);
    CHECK(std::abs(simulate(r2.schedule, std::vector<double>{0.4, 0.7}).output -
                   net_eval(wide, std::vector<double>{0.4, 0.7})) <= 1e-2);
  }
}

TEST_CASE("identity-ish net compiles to zero output") {
  FeedforwardNet net;
  net.input_dim = 2;
  net.width = 2;
  net.weight_bound = 0.5;
  FeedforwardNet::Layer l;
  l.weights = Eigen::MatrixXd::Zero(2, 2);
  l.bias = Eigen::VectorXd::Zero(2);
  net.layers = {l};
  net.readout.resize(2);
  net.readout << 1.0, 1.0;
  const auto res = compile_ffnet(net, 1e-2);
  CHECK(std::abs(simulate(res.schedule, std::vector<double>{0.8, 0.1}).output) <= 1e-6);
}

TEST_CASE("per-layer contracts along the compiled flow") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    const auto net = random_net(rng, 2, 2, 0.5);
    const auto res = compile_ffnet(net, 1e-2);
    const int P = res.block;
    const std::vector<double> x{u(rng), u(rng)};
    const auto sim = simulate(res.schedule, x);
    const auto zs = net_eval_states(net, x);
    for (int k = 0; k < net.depth(); ++k) {
      const double dk = res.budget.delta[k];
      const double load_cap = (net.weight_bound * net.width + 1.0) * dk;
      const Eigen::VectorXd pre =
          net.layers[k].weights * zs[k].head(2) + net.layers[k].bias;
      const auto& after1 = sim.segment_states[3 * k];
      const auto& after3 = sim.segment_states[3 * k + 2];
      for (int j = 0; j < P; ++j) {
        CHECK(std::abs(after1[j]) <= load_cap + 1e-12);                 // alpha
        CHECK(std::abs(after1[P + j]) <= load_cap + 1e-12);             // lambda
        CHECK(std::abs(after1[2 * P + j] - pre(j)) <= load_cap + 1e-12);  // mu - (A z + b)
      }
      const double step_cap = res.budget.step_bound[k];
      for (int j = 0; j < P; ++j) {
        CHECK(std::abs(after3[j] - std::tanh(pre(j))) <= step_cap + 1e-12);
        CHECK(std::abs(after3[P + j]) <= step_cap + 1e-12);
        CHECK(std::abs(after3[2 * P + j]) <= step_cap + 1e-12);
      }
    }
  }
}

TEST_CASE("depth-3 net end-to-end on a 21-per-dim grid") {
  std::mt19937_64 rng(23);
  const auto net = random_net(rng, 2, 3, 0.5);  // K = 1.5 <= 2, depth 3
  const auto res = compile_ffnet(net, 1e-2);
  CHECK(res.schedule.width == 6);
  CHECK(res.schedule.segments.size() == 9);
  double worst = 0.0;
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const std::vector<double> x{i / 20.0, j / 20.0};
      worst = std::max(worst, std::abs(simulate(res.schedule, x).output - net_eval(net, x)));
    }
  }
  CHECK(worst <= 1e-2);
}

TEST_CASE("the activation step is a swappable parameter") {
  const auto net = demo_net();
  const auto res = compile_ffnet(net, 1e-2, tanh_activation_step);
  const auto res_default = compile_ffnet(net, 1e-2);
  const std::vector<double> x{0.3, 0.6};
  CHECK(simulate(res.schedule, x).output == simulate(res_default.schedule, x).output);
  // a do-nothing activation leaves alpha at its decayed value: output near 0
  const auto frozen = compile_ffnet(net, 1e-2, [](int) { return ControlSegment{}; });
  CHECK(std::abs(simulate(frozen.schedule, x).output) <= 1e-6);
}

TEST_CASE("compiled net tracks the recurrence on a grid") {
  const auto net = demo_net();
  const auto res = compile_ffnet(net, 1e-2);
  double worst = 0.0;
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) {
      const std::vector<double> x{i / 10.0, j / 10.0};
      worst = std::max(worst, std::abs(simulate(res.schedule, x).output - net_eval(net, x)));
    }
  }
  CHECK(worst <= 1e-2);
  CHECK(worst <= 1e-6);  // the budget is loose; the realization is much tighter
}
