#include "qode/gadgets.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace qode {

namespace {

void require_distinct(std::initializer_list<int> slots, const char* who) {
  std::set<int> seen;
  for (int s : slots) {
    if (s < 0) throw std::invalid_argument(std::string(who) + ": negative slot index");
    if (!seen.insert(s).second) {
      throw std::invalid_argument(std::string(who) + ": slot indices must be distinct");
    }
  }
}

}  // namespace

ControlSegment tanh_gadget(double a, double b, const TanhGadgetSlots& s) {
  require_distinct({s.input, s.output, s.aux}, "tanh_gadget");
  ControlSegment seg;
  seg.duration = 1.0;
  // d(out) = a*in + b - out*aux
  seg.add_linear(s.output, s.input, a);
  seg.add_constant(s.output, b);
  seg.add_quadratic(s.output, s.output, s.aux, -1.0);
  // d(aux) = a^2 in^2 + 2ab in + b^2 - aux^2
  seg.add_quadratic(s.aux, s.input, s.input, a * a);
  seg.add_linear(s.aux, s.input, 2.0 * a * b);
  seg.add_constant(s.aux, b * b);
  seg.add_quadratic(s.aux, s.aux, s.aux, -1.0);
  return seg;
}

TanhClosedForm tanh_closed_form(double a, double b, double xi) {
  const double z = a * xi + b;
  const double t = std::tanh(z);
  return {xi, t, z * t};
}

ControlSegment ln_gadget(const LnGadgetSlots& s) {
  require_distinct({s.value, s.log_out}, "ln_gadget");
  ControlSegment seg;
  seg.duration = 1.0;
  seg.add_linear(s.log_out, s.value, 1.0);
  seg.add_quadratic(s.value, s.value, s.value, -1.0);
  return seg;
}

ControlSegment mul_gadget(std::span<const double> weights, double bias,
                          const MulGadgetSlots& s) {
  if (weights.size() != s.logs.size()) {
    throw std::invalid_argument("mul_gadget: weights and log slots differ in length");
  }
  std::set<int> seen{s.product};
  for (int q : s.logs) {
    if (!seen.insert(q).second) {
      throw std::invalid_argument("mul_gadget: slot indices must be distinct");
    }
  }
  ControlSegment seg;
  seg.duration = 1.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    seg.add_quadratic(s.product, s.logs[i], s.product, weights[i]);
  }
  seg.add_linear(s.product, s.product, bias);
  return seg;
}

}  // namespace qode
