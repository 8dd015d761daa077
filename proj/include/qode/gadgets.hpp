#pragma once

#include <span>
#include <vector>

#include "qode/schedule.hpp"

namespace qode {

/// Slot roles for the duration-1 tanh flow. `input` must be constant over
/// the segment; `output` and `aux` must hold 0 at segment start.
struct TanhGadgetSlots {
  int input = 0;
  int output = 1;
  int aux = 2;
};

/// Emits the segment
///   d(output) = (a*input + b) - output*aux
///   d(aux)    = (a*input + b)^2 - aux^2
/// whose time-1 flow gives output = tanh(a*xi + b), aux = (a*xi + b)*tanh(a*xi + b).
ControlSegment tanh_gadget(double a, double b, const TanhGadgetSlots& slots);

struct TanhClosedForm {
  double input;
  double output;
  double aux;
};

/// Exact endpoint of the tanh gadget flow (test oracle).
TanhClosedForm tanh_closed_form(double a, double b, double xi);

/// Slot roles for the duration-1 log flow. `value` must hold xi - 1 at
/// entry with xi > 0; for xi <= 0 the flow escapes in finite time <= 1 and
/// integration fails. `log_out` accumulates ln(xi) on top of its entry value.
struct LnGadgetSlots {
  int value = 0;
  int log_out = 1;
};

/// Emits d(log_out) = value, d(value) = -value^2; after time 1 the value
/// slot holds (xi-1)/xi and log_out has gained ln(xi).
ControlSegment ln_gadget(const LnGadgetSlots& slots);

/// Slot roles for the duration-1 product flow. The log slots must be
/// constant over the segment; the product slot is multiplied by
/// exp(bias) * prod_i exp(weights[i] * logs[i]).
struct MulGadgetSlots {
  std::vector<int> logs;
  int product = 0;
};

/// Emits d(product) = (sum_i weights[i]*y[logs[i]] + bias) * product.
/// Division is the same flow with negated weights and bias.
ControlSegment mul_gadget(std::span<const double> weights, double bias,
                          const MulGadgetSlots& slots);

}  // namespace qode
