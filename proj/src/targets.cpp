#include "qode/targets.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace qode {

namespace {

constexpr double kPi = std::numbers::pi;

// sin(pi u) and cos(pi u) with exact zeros at the integer / half-integer
// lattice, so derivative coefficients that vanish there are exactly 0.0.
double sinpi(double u) {
  const double k = std::round(u);
  const double s = std::sin(kPi * (u - k));
  return std::fmod(k, 2.0) == 0.0 ? s : -s;
}

double cospi(double u) { return sinpi(u + 0.5); }

// m-th derivative of sin(w*pi*x + phase), expressed through quarter turns
double dsin(double wpi_scale, double x, int quarter_turns) {
  const double u = wpi_scale * x;
  switch (quarter_turns & 3) {
    case 0: return sinpi(u);
    case 1: return cospi(u);
    case 2: return -sinpi(u);
    default: return -cospi(u);
  }
}

std::map<std::string, SmoothTarget> make_registry() {
  std::map<std::string, SmoothTarget> reg;

  {
    SmoothTarget t;
    t.name = "sin1d";
    t.dim = 1;
    t.max_order = 2;  // pi^2 s <= 1 but pi^3 s > 1
    const double s = 1.0 / (2.0 * (1.0 + kPi * kPi));
    t.value = [s](std::span<const double> x) { return s * sinpi(x[0]); };
    t.partial = [s](std::span<const int> a, std::span<const double> x) {
      return s * std::pow(kPi, a[0]) * dsin(1.0, x[0], a[0]);
    };
    reg[t.name] = std::move(t);
  }
  {
    SmoothTarget t;
    t.name = "cos1d";
    t.dim = 1;
    t.max_order = 2;
    const double s = 1.0 / (2.0 * (1.0 + 4.0 * kPi * kPi));
    t.value = [s](std::span<const double> x) { return s * cospi(2.0 * x[0]); };
    t.partial = [s](std::span<const int> a, std::span<const double> x) {
      return s * std::pow(2.0 * kPi, a[0]) * dsin(2.0, x[0], a[0] + 1);
    };
    reg[t.name] = std::move(t);
  }
  {
    SmoothTarget t;
    t.name = "cos2d";
    t.dim = 2;
    t.max_order = 2;
    const double s = 1.0 / (2.0 * (1.0 + kPi * kPi));
    t.value = [s](std::span<const double> x) { return s * cospi(x[0]) * cospi(x[1]); };
    t.partial = [s](std::span<const int> a, std::span<const double> x) {
      return s * std::pow(kPi, a[0] + a[1]) * dsin(1.0, x[0], a[0] + 1) *
             dsin(1.0, x[1], a[1] + 1);
    };
    reg[t.name] = std::move(t);
  }
  {
    SmoothTarget t;
    t.name = "half1d";
    t.dim = 1;
    t.max_order = 64;
    t.value = [](std::span<const double>) { return 0.5; };
    t.partial = [](std::span<const int> a, std::span<const double>) {
      for (int ai : a) {
        if (ai > 0) return 0.0;
      }
      return 0.5;
    };
    reg[t.name] = std::move(t);
  }
  return reg;
}

const std::map<std::string, SmoothTarget>& registry() {
  static const std::map<std::string, SmoothTarget> reg = make_registry();
  return reg;
}

}  // namespace

const SmoothTarget& builtin_target(const std::string& name) {
  const auto& reg = registry();
  auto it = reg.find(name);
  if (it == reg.end()) {
    std::string names;
    for (const auto& [n, _] : reg) names += (names.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown target '" + name + "' (available: " + names + ")");
  }
  return it->second;
}

std::vector<std::string> builtin_target_names() {
  std::vector<std::string> out;
  for (const auto& [n, _] : registry()) out.push_back(n);
  return out;
}

}  // namespace qode
