#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qode/simulate.hpp"
#include "qode/sobolev.hpp"
#include "qode/targets.hpp"

using namespace qode;

namespace {
const IntegratorOptions kTight{1e-12, 1e-14, 100.0, 4'000'000};
}

TEST_CASE("choose_parameters") {
  SUBCASE("reference point: n=2, d=1, eps=0.1, gamma=0.5") {
    const auto p = choose_parameters(2, 1, 0.1, 0.5);
    CHECK(p.N == 5);
    CHECK(p.delta == doctest::Approx(0.025).epsilon(1e-14));
    // c = 10 atanh(0.95) = 5 ln 39
    CHECK(p.sharpness == doctest::Approx(5.0 * std::log(39.0)).epsilon(1e-12));
  }
  SUBCASE("derived bound is below the requested eps") {
    for (double eps : {0.4, 0.2, 0.1, 0.05}) {
      const auto p = choose_parameters(2, 1, eps, 0.5);
      CHECK(error_bound(2, 1, p.N, p.delta) <= eps + 1e-12);
    }
    const auto p2 = choose_parameters(2, 2, 0.25, 0.5);
    CHECK(p2.N == 8);
    CHECK(error_bound(2, 2, p2.N, p2.delta) <= 0.25 + 1e-12);
  }
  SUBCASE("gamma to 1 drives delta down and sharpness up") {
    const auto a = choose_parameters(2, 1, 0.1, 0.5);
    const auto b = choose_parameters(2, 1, 0.1, 0.9);
    CHECK(b.delta < a.delta);
    CHECK(b.sharpness > a.sharpness);
  }
  SUBCASE("bad inputs rejected") {
    CHECK_THROWS_AS(choose_parameters(2, 1, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(choose_parameters(2, 1, 0.1, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(choose_parameters(2, 1, 0.1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(choose_parameters(0, 1, 0.1, 0.5), std::invalid_argument);
  }
}

TEST_CASE("error_bound") {
  CHECK(error_bound(2, 1, 5, 0.025) == doctest::Approx(0.09).epsilon(1e-14));
  CHECK(error_bound(2, 1, 100000, 0.0) <= 1e-9);  // vanishes with N, delta
  // the resolution term falls with N, the leakage term rises with delta
  CHECK(error_bound(2, 1, 6, 0.0) < error_bound(2, 1, 5, 0.0));
  CHECK(error_bound(2, 1, 5, 0.03) > error_bound(2, 1, 5, 0.025));
}

TEST_CASE("multi-index enumeration") {
  CHECK(monomial_count(1, 2) == 2);
  CHECK(monomial_count(2, 2) == 3);
  CHECK(monomial_count(2, 3) == 6);
  const auto mis = multi_indices_below(2, 2);
  REQUIRE(mis.size() == 3);
  CHECK(mis[0] == MultiIndex{0, 0});
  CHECK(mis[1] == MultiIndex{0, 1});
  CHECK(mis[2] == MultiIndex{1, 0});
  CHECK(grid_tuples(2, 1).size() == 4);
  CHECK(grid_tuples(1, 5).size() == 6);
}

TEST_CASE("taylor_coefficients") {
  SUBCASE("hand expansion of x^2/2 at 0.5, order 3") {
    SmoothTarget t;
    t.name = "halfsquare";
    t.dim = 1;
    t.value = [](std::span<const double> x) { return 0.5 * x[0] * x[0]; };
    t.partial = [](std::span<const int> a, std::span<const double> x) {
      if (a[0] == 0) return 0.5 * x[0] * x[0];
      if (a[0] == 1) return x[0];
      if (a[0] == 2) return 1.0;
      return 0.0;
    };
    const auto c = taylor_coefficients(t, {1}, 2, 3);  // grid point 1/2
    CHECK(c.at({0}) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(c.at({1}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c.at({2}) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("exact on polynomials below the order") {
    SmoothTarget t;
    t.name = "affine";
    t.dim = 1;
    t.value = [](std::span<const double> x) { return 0.3 - 1.7 * x[0]; };
    t.partial = [](std::span<const int> a, std::span<const double> x) {
      if (a[0] == 0) return 0.3 - 1.7 * x[0];
      if (a[0] == 1) return -1.7;
      return 0.0;
    };
    const auto c = taylor_coefficients(t, {2}, 5, 2);
    for (double x : {0.0, 0.37, 1.0}) {
      const double p = c.at({0}) + c.at({1}) * (x - 0.4);
      CHECK(p == doctest::Approx(0.3 - 1.7 * x).epsilon(1e-14));
    }
  }
  SUBCASE("remainder bound on the unit-ball target") {
    const auto& t = builtin_target("sin1d");
    const int N = 5, n = 2;
    for (int k = 0; k <= N; ++k) {
      const auto c = taylor_coefficients(t, {k}, N, n);
      const double lo = std::max(0.0, (k - 1.0) / N), hi = std::min(1.0, (k + 1.0) / N);
      for (int i = 0; i <= 50; ++i) {
        const double x = lo + (hi - lo) * i / 50.0;
        const double p = c.at({0}) + c.at({1}) * (x - static_cast<double>(k) / N);
        CHECK(std::abs(t.value(std::vector<double>{x}) - p) <=
              0.5 * std::pow(1.0 / N, n) + 1e-12);
      }
    }
  }
}

TEST_CASE("recenter") {
  SUBCASE("constant polynomial") {
    std::map<MultiIndex, double> p{{{0}, 0.7}};
    const auto r = recenter(p, {3}, 1.0, 5);
    REQUIRE(r.size() == 1);
    CHECK(r.at({0}) == 0.7);
  }
  SUBCASE("hand shift: (x - 0.5) with delta = 1") {
    std::map<MultiIndex, double> p{{{0}, 0.0}, {{1}, 1.0}};
    const auto r = recenter(p, {1}, 1.0, 2);  // center 1/2
    CHECK(r.at({0}) == doctest::Approx(-1.5).epsilon(1e-15));
    CHECK(r.at({1}) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("pointwise identity for random polynomials, d = 2") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::map<MultiIndex, double> p;
      for (const auto& n : multi_indices_below(2, 3)) p[n] = u(rng);
      const MultiIndex k{2, 4};
      const int N = 5;
      const double delta = 1.0;
      const auto r = recenter(p, k, delta, N);
      for (int i = 0; i < 10; ++i) {
        const double x1 = 0.1 * i, x2 = u(rng) * 0.5 + 0.5;
        double lhs = 0.0, rhs = 0.0;
        for (const auto& [n, c] : p) {
          lhs += c * std::pow(x1 - 2.0 / N, n[0]) * std::pow(x2 - 4.0 / N, n[1]);
        }
        for (const auto& [n, c] : r) {
          rhs += c * std::pow(x1 + delta, n[0]) * std::pow(x2 + delta, n[1]);
        }
        CHECK(std::abs(lhs - rhs) <= 1e-10);
      }
    }
  }
}

TEST_CASE("direct evaluation") {
  SUBCASE("zero target evaluates to zero") {
    SmoothTarget z;
    z.name = "zero";
    z.dim = 1;
    z.value = [](std::span<const double>) { return 0.0; };
    z.partial = [](std::span<const int>, std::span<const double>) { return 0.0; };
    const auto config = SobolevConfig::make(2, 1, 0.1);
    CHECK(direct_fhat_eval(z, config, std::vector<double>{0.3}) == 0.0);
  }
  SUBCASE("constants are reproduced exactly by the blend") {
    const auto& t = builtin_target("half1d");
    const auto config = SobolevConfig::make(2, 1, 0.1);
    for (double x : {0.0, 0.21, 0.77, 1.0}) {
      CHECK(direct_fhat_eval(t, config, std::vector<double>{x}) ==
            doctest::Approx(0.5).epsilon(1e-14));
    }
  }
  SUBCASE("within the guaranteed bound for sin1d") {
    const auto& t = builtin_target("sin1d");
    const auto config = SobolevConfig::make(2, 1, 0.4);
    double worst = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const std::vector<double> x{i / 100.0};
      worst = std::max(worst, std::abs(t.value(x) - direct_fhat_eval(t, config, x)));
    }
    CHECK(worst <= 0.4);
  }
}

TEST_CASE("finite-difference target wrapper") {
  auto fd = finite_difference_target("fd_sin", 1,
                                     [](std::span<const double> x) { return std::sin(x[0]); });
  const std::vector<double> x{0.4};
  CHECK(fd.partial(std::vector<int>{0}, x) == std::sin(0.4));
  CHECK(fd.partial(std::vector<int>{1}, x) == doctest::Approx(std::cos(0.4)).epsilon(1e-7));
  CHECK(fd.partial(std::vector<int>{2}, x) == doctest::Approx(-std::sin(0.4)).epsilon(1e-5));
}

TEST_CASE("compile structure") {
  SUBCASE("sin1d at eps = 0.1: the reference shape") {
    const auto res = compile_sobolev(builtin_target("sin1d"), SobolevConfig::make(2, 1, 0.1));
    CHECK(res.schedule.width == 15);
    CHECK(res.schedule.segments.size() == 11);
    CHECK(res.worst_case_segments == 11);
    CHECK(res.term_count_total == 12);
    CHECK(res.term_count_nonzero == 12);
    CHECK(res.schedule.segments.size() ==
          7 + static_cast<std::size_t>(
                  (2 * res.term_count_nonzero + (res.config.params.N + 2) - 1) /
                  (res.config.params.N + 2)));
  }
  SUBCASE("cos1d drops exact zeros and exercises the fused final batch") {
    const auto res = compile_sobolev(builtin_target("cos1d"), SobolevConfig::make(2, 1, 0.1));
    // derivative vanishes identically at the ends of the period
    CHECK(res.term_count_nonzero == 10);
    CHECK(res.assignment.fused_final);
    CHECK(res.schedule.segments.size() == 7 + 3);  // ceil(2*10/7) = 3
  }
  SUBCASE("every batch fits the working-slot budget and matches preferred slots") {
    const auto res = compile_sobolev(builtin_target("cos2d"), SobolevConfig::make(2, 2, 0.25));
    CHECK(res.schedule.width == 41);
    const int B = (res.config.params.N + 2) * 2;
    CHECK(res.assignment.unmatched == 0);
    for (const auto& batch : res.assignment.batches) {
      CHECK(static_cast<int>(batch.size()) <= B);
      std::set<int> slots;
      for (const auto& pl : batch) CHECK(slots.insert(pl.slot).second);
    }
    CHECK(static_cast<int>(res.schedule.segments.size()) ==
          7 + res.assignment.segment_count());
    CHECK(static_cast<int>(res.schedule.segments.size()) ==
          7 + static_cast<int>((2 * res.term_count_nonzero + B - 1) / B));
  }
  SUBCASE("the displayed-drive chain variant is rejected for compilation") {
    CHECK_THROWS_AS(compile_sobolev(builtin_target("sin1d"), SobolevConfig::make(2, 1, 0.4),
                                    BootstrapVariant::psi_chain),
                    std::invalid_argument);
  }
  SUBCASE("order above the target's certificate is rejected") {
    CHECK_THROWS_AS(compile_sobolev(builtin_target("sin1d"), SobolevConfig::make(3, 1, 0.4)),
                    std::invalid_argument);
  }
  SUBCASE("dim mismatch rejected") {
    CHECK_THROWS_AS(compile_sobolev(builtin_target("cos2d"), SobolevConfig::make(2, 1, 0.4)),
                    std::invalid_argument);
  }
}

TEST_CASE("compiled schedule tracks the direct evaluation") {
  for (const char* name : {"sin1d", "cos1d", "half1d"}) {
    const auto& t = builtin_target(name);
    const auto config = SobolevConfig::make(2, 1, 0.4);
    const auto res = compile_sobolev(t, config);
    double worst = 0.0, worst_total = 0.0;
    for (int i = 0; i <= 20; ++i) {
      const std::vector<double> x{i / 20.0};
      const double sim = simulate(res.schedule, x).output;
      const double direct = direct_fhat_eval(t, config, x);
      worst = std::max(worst, std::abs(sim - direct));
      worst_total = std::max(worst_total, std::abs(sim - t.value(x)));
    }
    CAPTURE(name);
    CHECK(worst <= 1e-5);
    CHECK(worst_total <= 0.4);
  }
}

TEST_CASE("summing every recentered term reproduces the blended evaluation") {
  for (const char* name : {"sin1d", "cos2d"}) {
    const auto& t = builtin_target(name);
    const auto config = SobolevConfig::make(2, t.dim, 0.4);
    const auto terms = recentered_terms(t, config);
    std::vector<double> x(t.dim);
    for (double base : {0.17, 0.62}) {
      for (int j = 0; j < t.dim; ++j) x[j] = base + 0.2 * j;
      CHECK(direct_partial_sum(terms, terms.size(), x, config) ==
            doctest::Approx(direct_fhat_eval(t, config, x)).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("running sum equals the processed-term partial sums after every add segment") {
  const auto& t = builtin_target("sin1d");
  const auto config = SobolevConfig::make(2, 1, 0.4);
  const auto res = compile_sobolev(t, config);
  const auto terms = recentered_terms(t, config);
  REQUIRE(!res.assignment.fused_final);  // plain alternating batches here
  for (double xv : {0.15, 0.5, 0.83}) {
    const std::vector<double> x{xv};
    const auto sim = simulate(res.schedule, x, kTight);
    std::size_t processed = 0;
    for (std::size_t b = 0; b < res.assignment.batches.size(); ++b) {
      processed += res.assignment.batches[b].size();
      double expect = 0.0;
      for (std::size_t bb = 0; bb <= b; ++bb) {
        for (const auto& pl : res.assignment.batches[bb]) {
          expect += term_value(terms[pl.term], x, config);
        }
      }
      const auto& state = sim.segment_states[7 + 2 * b + 1];
      CHECK(state[res.layout.sum_slot()] == doctest::Approx(expect).epsilon(1e-6).scale(1.0));
    }
    CHECK(processed == terms.size());
  }
}

TEST_CASE("fused final segment adds its batch exactly") {
  const auto& t = builtin_target("cos1d");
  const auto config = SobolevConfig::make(2, 1, 0.1);
  const auto res = compile_sobolev(t, config);
  REQUIRE(res.assignment.fused_final);
  for (double xv : {0.2, 0.65}) {
    const std::vector<double> x{xv};
    const double sim = simulate(res.schedule, x, kTight).output;
    const double direct = direct_fhat_eval(t, config, x);
    CHECK(sim == doctest::Approx(direct).epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("compile on the shadow bootstrap also matches, with its larger width") {
  const auto& t = builtin_target("sin1d");
  const auto config = SobolevConfig::make(2, 1, 0.4);
  const auto res = compile_sobolev(t, config, BootstrapVariant::psi_chain_shadow);
  const int N = config.params.N;
  CHECK(res.schedule.width == 2 * (N + 2) + 1 + N);  // shadow slots appended
  CHECK(static_cast<int>(res.schedule.segments.size()) ==
        8 + res.assignment.segment_count());  // one reversal segment extra
  double worst = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const std::vector<double> x{i / 10.0};
    worst = std::max(worst, std::abs(simulate(res.schedule, x, kTight).output -
                                     direct_fhat_eval(t, config, x)));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("compile on the corrected chain matches the direct evaluation at mild sharpness") {
  // the reciprocal-chain bootstrap is usable when the partition tails stay
  // well above the integrator's resolution (delta = 0.2 here)
  const auto& t = builtin_target("sin1d");
  const auto config = SobolevConfig::make(2, 1, 0.4);
  CHECK(config.params.delta >= 0.2);
  const auto res = compile_sobolev(t, config, BootstrapVariant::psi_chain_mu_fix);
  double worst = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const std::vector<double> x{i / 10.0};
    worst = std::max(worst,
                     std::abs(simulate(res.schedule, x, kTight).output -
                              direct_fhat_eval(t, config, x)));
  }
  CHECK(worst <= 1e-5);
}
