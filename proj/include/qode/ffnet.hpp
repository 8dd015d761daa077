#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qode/schedule.hpp"

namespace qode {

class BudgetInfeasible : public std::runtime_error {
 public:
  explicit BudgetInfeasible(const std::string& what) : std::runtime_error(what) {}
};

/// A tanh feedforward net z(k+1) = tanh(A_k z(k) + b_k), scalar output
/// c . z(depth). All layers are width x width; inputs of dimension
/// input_dim <= width are zero-padded.
struct FeedforwardNet {
  struct Layer {
    Eigen::MatrixXd weights;  // width x width
    Eigen::VectorXd bias;     // width
  };
  int input_dim = 1;
  int width = 1;
  std::vector<Layer> layers;
  Eigen::VectorXd readout;
  double weight_bound = 0.0;  // M: every |A_k(i,j)| and |b_k(i)| is <= M

  int depth() const { return static_cast<int>(layers.size()); }
  void validate() const;

  static FeedforwardNet from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
  static FeedforwardNet load(const std::string& path);
};

/// Reference forward pass.
double net_eval(const FeedforwardNet& net, std::span<const double> x);
/// Forward pass returning every layer state z(0..depth) (padded to width).
std::vector<Eigen::VectorXd> net_eval_states(const FeedforwardNet& net, std::span<const double> x);

/// Deviation bound for the tanh flow under initial perturbations of size
/// delta with |drive| <= K:
///   (4K+2) e^{4K+2} delta / (4K+2 - 9(e^{4K+2}-1) delta),
/// valid for delta < (4K+2) / (9(e^{4K+2}-1)). Throws BudgetInfeasible
/// outside that range.
double perturbation_bound(double K, double delta);

/// Largest admissible delta in perturbation_bound for this K.
double perturbation_threshold(double K);

/// Per-layer error budget: delta_0 from the closed form (shrunk if needed so
/// each layer admits the tanh-step bound), then delta_{k+1} = Delta_k with
/// Delta_k = a1 delta_k / (a3 - a2 K... see fields; gains r1/r3 from the
/// per-layer deltas.
struct LayerBudget {
  double K = 0.0;                 // M (width+1)
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;
  double delta0 = 0.0;
  std::vector<double> delta;      // delta_0 .. delta_depth
  std::vector<double> step_bound; // Delta_k per layer
  std::vector<double> r1;         // per-layer load gain
  std::vector<double> r3;         // per-layer cleanup gain
};

LayerBudget budget(const FeedforwardNet& net, double eps);

struct FfnetCompileResult {
  ControlSchedule schedule;
  LayerBudget budget;
  int block = 0;  // max(width, input_dim): each of alpha/lambda/mu occupies this many slots
};

/// The middle segment of each compiled layer: a flow on (alpha, lambda)
/// driven by the frozen mu block that realizes the activation. `block` is
/// the per-role slot count (alpha_j = j, lambda_j = block+j, mu_j = 2*block+j).
using ActivationStep = std::function<ControlSegment(int block)>;

/// The tanh activation: d(alpha_j) = mu_j - alpha_j lambda_j,
/// d(lambda_j) = mu_j^2 - lambda_j^2.
ControlSegment tanh_activation_step(int block);

/// Compiles the net into 3 segments per layer on 3*max(width, input_dim)
/// states: (1) decay alpha while loading A_k alpha + b_k into mu,
/// (2) the activation flow on (alpha, lambda) driven by mu, (3) decay lambda
/// and mu. Other activations realizable as such flows can be swapped in;
/// the surrounding load/cleanup segments are unchanged.
FfnetCompileResult compile_ffnet(const FeedforwardNet& net, double eps,
                                 const ActivationStep& activation = tanh_activation_step);

struct PerturbationReport {
  int trials = 0;
  double bound = 0.0;
  double max_deviation = 0.0;
  double max_ratio = 0.0;       // max observed deviation / bound
  int violations = 0;
  std::vector<double> worst_case;  // (xi, eta1, eta2, eta3) at the max ratio
};

/// Simulates the 3-state tanh flow with and without random initial
/// perturbations (|xi| <= K, |eta| <= delta) and compares the deviation
/// against perturbation_bound.
PerturbationReport verify_perturbation_bound(double K, double delta, int trials,
                                             unsigned long long seed = 0);

}  // namespace qode
