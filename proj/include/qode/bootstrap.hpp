#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qode/schedule.hpp"

namespace qode {

/// Sigmoid-difference partition of unity on [0,1]: N+1 bumps with
/// breakpoints gamma_k = (2k-1)/(2N) and sharpness c.
struct PartitionParams {
  int N = 1;
  double sharpness = 1.0;

  double breakpoint(int k) const { return (2.0 * k - 1.0) / (2.0 * N); }  // k = 1..N
  /// Smallest sharpness for which psi_k <= delta outside its approximate
  /// support: 2*N*atanh(1-2*delta).
  static double min_sharpness(int N, double delta);
  void validate() const;
};

/// psi_k(x), k = 0..N. Evaluated through algebraically equal sech-product
/// forms; the textbook tanh-difference display cancels catastrophically in
/// doubles once |c(x-gamma)| exceeds ~17.
double psi_eval(int k, double x, const PartitionParams& p);

/// ln(psi_k(x)) without forming psi (finite even where psi underflows).
double log_psi_eval(int k, double x, const PartitionParams& p);

/// Product of per-coordinate psi values, phi_k(x) = prod_j psi_{k_j}(x_j).
double phi_eval(std::span<const int> ks, std::span<const double> x, const PartitionParams& p);

/// Upper-triangular mixing matrix with diagonal -ln 2 and superdiagonals
/// -1, -1/2, ..., -1/N; its exponential is bidiagonal (1/2 on the diagonal,
/// -1/2 above).
Eigen::MatrixXd step2_matrix(int N);

/// Bias vector b = A (e^A - I)^{-1} (0,...,0,1/2)^T via triangular solve.
Eigen::VectorXd step2_bias(int N);

/// Coefficients for the corrected stage-2 mu drive: with
///   d(mu_{j,k}) = c(alpha_j - gamma_k) * (rows.row(k) . lambda + bias[k])
/// the mu block returns to zero at the end of stage 2 for every input.
/// rows = -(F^{-1}), bias = F^{-1} H b, F = int_0^1 e^{tA} dt, H = A^{-1}(F-I).
struct Step2MuCorrection {
  Eigen::MatrixXd rows;
  Eigen::VectorXd bias;
};
Step2MuCorrection step2_mu_correction(int N);

enum class BootstrapVariant {
  psi_chain,         // psi built in the lambda slots, logs via the reciprocal chain;
                     // stage-2 mu drive as displayed (leaves a residual; see check suite)
  psi_chain_mu_fix,  // psi_chain with the corrected stage-2 mu drive
  psi_chain_shadow,  // psi_chain + N*d shadow slots and one reversal segment zeroing mu
  log_cosh,          // log psi accumulated from bounded tanh-pair trajectories; same
                     // terminal state, usable at high sharpness where the reciprocal
                     // chain is numerically untraversable
};
const char* to_string(BootstrapVariant v);
BootstrapVariant bootstrap_variant_from_string(const std::string& name);

/// Slot map for the bootstrap state. Per input coordinate j (0-based):
/// one alpha slot, N+1 lambda slots, one beta slot, N+1 mu slots, plus one
/// shared running-sum slot; shadow layouts append N*d shadow slots.
struct StateLayout {
  int dim = 1;
  int N = 1;
  bool shadow = false;

  int width() const { return 2 * (N + 2) * dim + 1 + (shadow ? N * dim : 0); }
  int alpha(int j) const { return j; }
  int lambda_slot(int j, int k) const { return dim + k * dim + j; }         // k = 0..N
  int beta(int j) const { return (N + 2) * dim + j; }
  int mu_slot(int j, int k) const { return (N + 3) * dim + k * dim + j; }   // k = 0..N
  int sum_slot() const { return 2 * (N + 2) * dim; }
  int shadow_slot(int j, int k) const {                                     // k = 1..N
    return 2 * (N + 2) * dim + 1 + (k - 1) * dim + j;
  }
};

struct Bootstrap {
  StateLayout layout;
  std::vector<ControlSegment> segments;  // 7 (8 for the shadow variant)
  BootstrapVariant variant = BootstrapVariant::psi_chain;
  PartitionParams params;
  double delta_shift = 1.0;

  /// Number of leading segments that complete construction step `step`
  /// (1..7); the shadow variant inserts its reversal segment after step 1.
  int segments_through_step(int step) const;
};

/// Emits the 7 duration-1 segments steering the embedded input to
///   alpha = 1, lambda = 1, beta_j = ln(x_j + delta_shift),
///   mu_{j,k} = ln(psi_k(x_j)), sum = 0.
Bootstrap build_bootstrap(int dim, const PartitionParams& p, double delta_shift,
                          BootstrapVariant variant = BootstrapVariant::psi_chain);

/// Closed-form state after each construction step (0..7) of the psi_chain
/// staging (the per-step reference table). Shadow slots are included when
/// the layout has them.
std::vector<double> expected_state_after_step(int step, std::span<const double> x,
                                              const PartitionParams& p, double delta_shift,
                                              const StateLayout& layout);

}  // namespace qode
