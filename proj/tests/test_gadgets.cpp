#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qode/gadgets.hpp"
#include "qode/integrate.hpp"

using namespace qode;

namespace {
const IntegratorOptions kTight{1e-12, 1e-14, 100.0, 4'000'000};
}

TEST_CASE("tanh closed form") {
  const auto r = tanh_closed_form(1.0, 0.0, 0.5);
  CHECK(r.input == 0.5);
  CHECK(r.output == doctest::Approx(0.4621171572600097).epsilon(1e-15));
  CHECK(r.aux == doctest::Approx(0.2310585786300049).epsilon(1e-15));
  const auto z = tanh_closed_form(1.0, 0.0, 0.0);
  CHECK(z.output == 0.0);
  CHECK(z.aux == 0.0);
  CHECK(tanh_closed_form(2.0, -1.0, 1.0).output ==
        doctest::Approx(0.7615941559557649).epsilon(1e-15));
}

TEST_CASE("tanh gadget flow matches the closed form") {
  for (auto [a, b, xi] : {std::tuple{1.0, 0.0, 0.0}, {1.0, 0.0, 0.5}, {2.0, -1.0, 1.0}}) {
    const auto seg = tanh_gadget(a, b, {0, 1, 2});
    const auto y = integrate_segment(seg, std::vector<double>{xi, 0.0, 0.0}, kTight);
    const auto ref = tanh_closed_form(a, b, xi);
    CHECK(y[0] == xi);  // input slot untouched
    CHECK(y[1] == doctest::Approx(ref.output).epsilon(1e-10));
    CHECK(y[2] == doctest::Approx(ref.aux).epsilon(1e-10));
  }
}

TEST_CASE("tanh gadget property sweep") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst = 0.0;
  for (int t = 0; t < 300; ++t) {
    const double a = u(rng), b = u(rng), xi = u(rng);
    const auto y = integrate_segment(tanh_gadget(a, b, {0, 1, 2}),
                                     std::vector<double>{xi, 0.0, 0.0}, kTight);
    const auto ref = tanh_closed_form(a, b, xi);
    worst = std::max({worst, std::abs(y[1] - ref.output), std::abs(y[2] - ref.aux)});
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("gadget slot validation") {
  CHECK_THROWS_AS(tanh_gadget(1.0, 0.0, {0, 0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(ln_gadget({1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(mul_gadget(std::vector<double>{1.0}, 0.0, {{2}, 2}), std::invalid_argument);
  CHECK_THROWS_AS(mul_gadget(std::vector<double>{1.0, 2.0}, 0.0, {{0}, 1}),
                  std::invalid_argument);
}

TEST_CASE("ln gadget") {
  const auto seg = ln_gadget({0, 1});
  SUBCASE("fixed point at xi = 1") {
    const auto y = integrate_segment(seg, std::vector<double>{0.0, 0.0}, kTight);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
  }
  SUBCASE("xi = e increments the log slot by 1") {
    const auto y = integrate_segment(seg, std::vector<double>{std::exp(1.0) - 1.0, 3.0}, kTight);
    CHECK(y[1] == doctest::Approx(4.0).epsilon(1e-8));
    CHECK(y[0] == doctest::Approx((std::exp(1.0) - 1.0) / std::exp(1.0)).epsilon(1e-10));
  }
  SUBCASE("near-singular xi = 0.05") {
    const auto y = integrate_segment(seg, std::vector<double>{0.05 - 1.0, 0.0}, kTight);
    CHECK(y[1] == doctest::Approx(std::log(0.05)).epsilon(1e-6));
  }
  SUBCASE("deep transit within the pole-resolution budget of doubles") {
    // the flow passes within xi of a blow-up; the trajectory's pole location
    // carries O(rtol)-level wander, so xi around 1e-5 is the depth at which
    // 1e-6 log accuracy is still attainable
    const double xi = 1e-5;
    const auto y = integrate_segment(seg, std::vector<double>{xi - 1.0, 0.0}, kTight);
    CHECK(y[1] == doctest::Approx(std::log(xi)).epsilon(1e-6));
  }
}

TEST_CASE("mul gadget") {
  SUBCASE("zero weights and bias is the identity") {
    const auto seg = mul_gadget(std::vector<double>{0.0, 0.0}, 0.0, {{0, 1}, 2});
    const auto y = integrate_segment(seg, std::vector<double>{-0.3, 0.7, 1.25}, kTight);
    CHECK(y[2] == 1.25);  // empty coefficient lists: exact identity
  }
  SUBCASE("monomial xi1^2 xi2 from logs") {
    const std::vector<double> logs{std::log(0.5), std::log(0.3)};
    const auto seg = mul_gadget(std::vector<double>{2.0, 1.0}, 0.0, {{0, 1}, 2});
    const auto y = integrate_segment(seg, std::vector<double>{logs[0], logs[1], 1.0}, kTight);
    CHECK(y[2] == doctest::Approx(0.075).epsilon(1e-9));
  }
  SUBCASE("inverse flow returns the product slot to its start") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> u01(0.05, 1.0);
    for (int t = 0; t < 50; ++t) {
      const std::vector<double> w{u(rng), u(rng)};
      const double b = u(rng);
      const std::vector<double> start{std::log(u01(rng)), std::log(u01(rng)), 1.0};
      auto y = integrate_segment(mul_gadget(w, b, {{0, 1}, 2}), start, kTight);
      const std::vector<double> wneg{-w[0], -w[1]};
      y = integrate_segment(mul_gadget(wneg, -b, {{0, 1}, 2}), y, kTight);
      CHECK(y[2] == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
  SUBCASE("random products, d <= 5, relative accuracy") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    IntegratorOptions xtight = kTight;
    xtight.rtol = 1e-13;  // exponent rates reach ~50
    xtight.atol = 1e-15;
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      const int d = 1 + static_cast<int>(rng() % 5);
      std::vector<double> w(d);
      std::vector<double> y0;
      const double b = u(rng);
      double expect = b;
      MulGadgetSlots slots;
      for (int j = 0; j < d; ++j) {
        w[j] = u(rng);
        const double xi = std::max(u01(rng), 0.01);
        y0.push_back(std::log(xi));
        expect += w[j] * std::log(xi);
        slots.logs.push_back(j);
      }
      slots.product = d;
      y0.push_back(1.0);
      expect = std::exp(expect);
      const auto y = integrate_segment(mul_gadget(w, b, slots), y0, xtight);
      worst = std::max(worst, std::abs(y[d] - expect) / std::abs(expect));
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("per-coordinate logs then one product flow rebuilds monomials") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> u01(0.05, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 60; ++t) {
    const int d = 1 + static_cast<int>(rng() % 3);
    std::vector<double> w(d), y0(2 * d + 1, 0.0);
    double expect = 0.0;
    for (int j = 0; j < d; ++j) {
      w[j] = u(rng);
      const double xi = u01(rng);
      y0[j] = xi - 1.0;
      expect += w[j] * std::log(xi);
    }
    y0[2 * d] = 1.0;
    expect = std::exp(expect);
    ControlSegment logs;
    for (int j = 0; j < d; ++j) {
      const auto g = ln_gadget({j, d + j});
      logs.linear.insert(logs.linear.end(), g.linear.begin(), g.linear.end());
      logs.quadratic.insert(logs.quadratic.end(), g.quadratic.begin(), g.quadratic.end());
    }
    auto y = integrate_segment(logs, y0, kTight);
    MulGadgetSlots slots;
    for (int j = 0; j < d; ++j) slots.logs.push_back(d + j);
    slots.product = 2 * d;
    y = integrate_segment(mul_gadget(w, 0.0, slots), y, kTight);
    worst = std::max(worst, std::abs(y[2 * d] - expect));
  }
  CHECK(worst <= 1e-7);
}
