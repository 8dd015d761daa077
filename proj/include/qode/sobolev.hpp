#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qode/bootstrap.hpp"
#include "qode/schedule.hpp"

namespace qode {

/// A target function on [0,1]^d with mixed partial derivatives available up
/// to total order max_order - 1. partial({0,...,0}, x) must equal value(x).
struct SmoothTarget {
  std::string name;
  int dim = 1;
  int max_order = 64;  // largest order n for which the unit Sobolev bound is certified
  std::function<double(std::span<const double>)> value;
  std::function<double(std::span<const int>, std::span<const double>)> partial;
};

/// Wraps a plain function with central finite differences (step h) for the
/// partial derivatives. Accuracy degrades with the derivative order; fine for
/// smoke use, not for tight tolerances.
SmoothTarget finite_difference_target(std::string name, int dim,
                                      std::function<double(std::span<const double>)> f,
                                      double step = 1e-4);

struct SobolevParameters {
  int N = 1;
  double delta = 0.0;
  double sharpness = 0.0;
};

/// Resolution/leakage/sharpness choice for a requested accuracy:
///   N = ceil((n!/d^n * gamma*eps/2^d)^(-1/n)),
///   delta = min(n!/d^n * (1-gamma)*eps / ((N+1)^d - 2^d), 0.499),
///   c = 2N atanh(1-2 delta).
SobolevParameters choose_parameters(int order, int dim, double eps, double gamma);

/// (d^n/n!) * (2^d N^{-n} + ((N+1)^d - 2^d) delta): the guaranteed sup error
/// of the blended local-polynomial approximation.
double error_bound(int order, int dim, int N, double delta);

struct SobolevConfig {
  int order = 2;
  int dim = 1;
  double eps = 0.1;
  double gamma = 0.5;
  double delta_shift = 1.0;
  SobolevParameters params;

  static SobolevConfig make(int order, int dim, double eps, double gamma = 0.5,
                            double delta_shift = 1.0);
  PartitionParams partition() const { return {params.N, params.sharpness}; }
};

using MultiIndex = std::vector<int>;

/// All multi-indices with |n| < order, lexicographic.
std::vector<MultiIndex> multi_indices_below(int dim, int order);
/// {0..N}^dim, lexicographic.
std::vector<MultiIndex> grid_tuples(int dim, int N);
/// Count of multi-indices with |n| < order in dim variables, C(dim+order-1, dim).
long long monomial_count(int dim, int order);

/// Coefficients of the degree order-1 polynomial expansion of the target at
/// grid point k/N, in powers of (x - k/N): coeff[n] = f^(n)(k/N) / prod n_j!.
std::map<MultiIndex, double> taylor_coefficients(const SmoothTarget& f, const MultiIndex& k,
                                                 int N, int order);

/// Exact change of basis from powers of (x_j - k_j/N) to powers of
/// (x_j + delta_shift) via per-coordinate binomial expansion.
std::map<MultiIndex, double> recenter(const std::map<MultiIndex, double>& taylor,
                                      const MultiIndex& k, double delta_shift, int N);

/// One blended-polynomial term: coeff * prod_j (x_j+delta)^{n_j} * prod_j psi_{k_j}(x_j).
struct Term {
  MultiIndex k;
  MultiIndex n;
  double coeff = 0.0;
};

/// All nonzero recentered terms in lexicographic (k, n) order.
std::vector<Term> recentered_terms(const SmoothTarget& f, const SobolevConfig& config);

double term_value(const Term& t, std::span<const double> x, const SobolevConfig& config);

/// Reference evaluation of the blended local-polynomial approximation
/// (no ODE): sum_k phi_k(x) P_k(x).
double direct_fhat_eval(const SmoothTarget& f, const SobolevConfig& config,
                        std::span<const double> x);

/// Sum of the first `count` recentered terms, for run-in-progress checks.
double direct_partial_sum(std::span<const Term> terms, std::size_t count,
                          std::span<const double> x, const SobolevConfig& config);

/// Placement of terms on working slots across multiply/accumulate batches.
struct BatchAssignment {
  struct Placement {
    int term = -1;  // index into the term list
    int slot = -1;  // 0-based state index
  };
  std::vector<std::vector<Placement>> batches;
  bool fused_final = false;     // last batch emits one fused segment
  int unmatched = 0;            // terms that had to take a non-matching slot
  int segment_count() const {
    if (batches.empty()) return 0;
    return 2 * static_cast<int>(batches.size()) - (fused_final ? 1 : 0);
  }
};

/// Distributes terms over the (N+2)*d working slots so that the batch phase
/// uses exactly ceil(2*nnz/B) segments (the final batch folds its add into
/// the product segment when that count is odd). Terms prefer their own
/// lambda slot (the slot whose k index matches the term's k_j) or an alpha
/// slot; a capacity-constrained augmenting-path search makes the preference
/// feasible whenever possible and falls back to any free slot otherwise.
BatchAssignment assign_batches(const std::vector<Term>& terms, const StateLayout& layout);

struct SobolevCompileResult {
  ControlSchedule schedule;
  StateLayout layout;
  SobolevConfig config;
  BatchAssignment assignment;
  BootstrapVariant variant = BootstrapVariant::log_cosh;
  long long term_count_total = 0;
  long long term_count_nonzero = 0;
  int worst_case_segments = 0;  // 7 + ceil(2 M (N+1)^d / B)
  double bound = 0.0;
  std::vector<std::string> warnings;
};

/// Compiles the target into a schedule: 7 bootstrap segments, then
/// multiply/accumulate batches over the recentered terms, readout on the
/// running-sum slot. Width is 2(N+2)d+1 and the segment count is
/// 7 + ceil(2*nnz/((N+2)d)).
SobolevCompileResult compile_sobolev(const SmoothTarget& f, const SobolevConfig& config,
                                     BootstrapVariant variant = BootstrapVariant::log_cosh);

}  // namespace qode
