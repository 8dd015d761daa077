#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qode {

/// dy[row] += value * y[col]
struct LinearTerm {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// dy[row] += value * y[j] * y[k]   (j/k order is preserved, not normalized)
struct QuadraticTerm {
  int row = 0;
  int j = 0;
  int k = 0;
  double value = 0.0;
};

/// dy[row] += value
struct ConstantTerm {
  int row = 0;
  double value = 0.0;
};

/// y_out += value * y[index] at readout time
struct ReadoutTerm {
  int index = 0;
  double value = 0.0;
};

class InvalidSchedule : public std::runtime_error {
 public:
  explicit InvalidSchedule(const std::string& what) : std::runtime_error(what) {}
};

class IntegrationFailure : public std::runtime_error {
 public:
  IntegrationFailure(int segment, const std::string& what)
      : std::runtime_error(what), segment_index(segment) {}
  int segment_index;
};

/// One maximal interval on which every control coefficient is constant.
/// The right-hand side over the segment is
///   dy[i] = sum_j a[i][j] y[j] + sum_{j,k} q[i][j][k] y[j] y[k] + b[i]
/// stored sparsely. Indices are 0-based in memory; the file format is 1-based.
struct ControlSegment {
  double duration = 1.0;
  std::vector<LinearTerm> linear;
  std::vector<QuadraticTerm> quadratic;
  std::vector<ConstantTerm> constant;

  // Builders skip exact zeros so sparsity reflects the construction.
  void add_linear(int row, int col, double value);
  void add_quadratic(int row, int j, int k, double value);
  void add_constant(int row, double value);

  bool empty() const { return linear.empty() && quadratic.empty() && constant.empty(); }
};

/// A compiled piecewise-constant control program: width, input embedding,
/// ordered segments and a linear readout of the terminal state.
struct ControlSchedule {
  int width = 0;
  int input_dim = 0;
  std::vector<ControlSegment> segments;
  std::vector<ReadoutTerm> readout;

  double total_duration() const;

  /// Structural checks: positive durations, indices within width, no
  /// duplicate coefficient keys, readout in range. Throws InvalidSchedule.
  void validate() const;
};

}  // namespace qode
