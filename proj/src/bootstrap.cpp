#include "qode/bootstrap.hpp"

#include <cmath>
#include <stdexcept>

#include "qode/linalg.hpp"

namespace qode {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kDecayRate = 50.0;  // hardware clearing rate in the log_cosh variant

double log_sinh(double x) {  // x > 0
  return x + std::log1p(-std::exp(-2.0 * x)) - kLn2;
}

}  // namespace

double PartitionParams::min_sharpness(int N, double delta) {
  if (!(delta > 0.0 && delta < 0.5)) {
    throw std::invalid_argument("min_sharpness: delta must be in (0, 1/2)");
  }
  return 2.0 * N * std::atanh(1.0 - 2.0 * delta);
}

void PartitionParams::validate() const {
  if (N < 1) throw std::invalid_argument("partition: N must be >= 1");
  if (!(sharpness > 0.0) || !std::isfinite(sharpness)) {
    throw std::invalid_argument("partition: sharpness must be positive");
  }
}

double psi_eval(int k, double x, const PartitionParams& p) {
  if (k < 0 || k > p.N) {
    throw std::invalid_argument("psi_eval: k must be in [0, N]");
  }
  const double c = p.sharpness;
  if (k == 0) {
    const double g = c * (x - p.breakpoint(1));
    // 1/2 - 1/2 tanh(g) == logistic(-2g)
    return g > 0 ? std::exp(-2.0 * g) / (1.0 + std::exp(-2.0 * g))
                 : 1.0 / (1.0 + std::exp(2.0 * g));
  }
  if (k == p.N) {
    const double g = c * (x - p.breakpoint(p.N));
    return g < 0 ? std::exp(2.0 * g) / (1.0 + std::exp(2.0 * g))
                 : 1.0 / (1.0 + std::exp(-2.0 * g));
  }
  const double g1 = c * (x - p.breakpoint(k));
  const double g2 = c * (x - p.breakpoint(k + 1));
  const double u = c / p.N;  // g1 - g2, positive
  if (std::abs(g1) < 300.0 && std::abs(g2) < 300.0 && u < 300.0) {
    return std::sinh(u) / (2.0 * std::cosh(g1) * std::cosh(g2));
  }
  return std::exp(log_psi_eval(k, x, p));
}

double log_psi_eval(int k, double x, const PartitionParams& p) {
  if (k < 0 || k > p.N) {
    throw std::invalid_argument("log_psi_eval: k must be in [0, N]");
  }
  const double c = p.sharpness;
  if (k == 0) {
    const double g = c * (x - p.breakpoint(1));
    return -kLn2 - g - log_cosh(g);
  }
  if (k == p.N) {
    const double g = c * (x - p.breakpoint(p.N));
    return -kLn2 + g - log_cosh(g);
  }
  const double g1 = c * (x - p.breakpoint(k));
  const double g2 = c * (x - p.breakpoint(k + 1));
  return log_sinh(c / p.N) - kLn2 - log_cosh(g1) - log_cosh(g2);
}

double phi_eval(std::span<const int> ks, std::span<const double> x, const PartitionParams& p) {
  if (ks.size() != x.size()) {
    throw std::invalid_argument("phi_eval: index tuple and point have different lengths");
  }
  double prod = 1.0;
  for (std::size_t j = 0; j < ks.size(); ++j) prod *= psi_eval(ks[j], x[j], p);
  return prod;
}

Eigen::MatrixXd step2_matrix(int N) {
  if (N < 1) throw std::invalid_argument("step2_matrix: N must be >= 1");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(N + 1, N + 1);
  for (int k = 0; k <= N; ++k) {
    a(k, k) = -kLn2;
    for (int l = k + 1; l <= N; ++l) a(k, l) = -1.0 / (l - k);
  }
  return a;
}

Eigen::VectorXd step2_bias(int N) {
  const Eigen::MatrixXd a = step2_matrix(N);
  const Eigen::MatrixXd e = matrix_exp(a);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + 1);
  rhs(N) = 0.5;
  // (e^A - I) is upper triangular with diagonal -1/2, so solve directly.
  const Eigen::MatrixXd m = e - Eigen::MatrixXd::Identity(N + 1, N + 1);
  const Eigen::VectorXd z = m.triangularView<Eigen::Upper>().solve(rhs);
  return a * z;
}

Step2MuCorrection step2_mu_correction(int N) {
  const int n = N + 1;
  const Eigen::MatrixXd a = step2_matrix(N);
  const Eigen::MatrixXd e = matrix_exp(a);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd em1 = e - eye;
  // F = A^{-1}(e^A - I); F^{-1} = A(e^A - I)^{-1}; H = A^{-1}(F - I).
  const Eigen::MatrixXd f = a.triangularView<Eigen::Upper>().solve(em1);
  const Eigen::MatrixXd finv = em1.triangularView<Eigen::Upper>().solve(a);
  const Eigen::MatrixXd h = a.triangularView<Eigen::Upper>().solve(f - eye);
  const Eigen::VectorXd b = step2_bias(N);
  Step2MuCorrection corr;
  corr.rows = -finv;
  corr.bias = finv * (h * b);
  return corr;
}

const char* to_string(BootstrapVariant v) {
  switch (v) {
    case BootstrapVariant::psi_chain: return "psi_chain";
    case BootstrapVariant::psi_chain_mu_fix: return "psi_chain_mu_fix";
    case BootstrapVariant::psi_chain_shadow: return "psi_chain_shadow";
    case BootstrapVariant::log_cosh: return "log_cosh";
  }
  return "?";
}

BootstrapVariant bootstrap_variant_from_string(const std::string& name) {
  if (name == "psi_chain" || name == "chain") return BootstrapVariant::psi_chain;
  if (name == "psi_chain_mu_fix" || name == "mu_fix") return BootstrapVariant::psi_chain_mu_fix;
  if (name == "psi_chain_shadow" || name == "shadow") return BootstrapVariant::psi_chain_shadow;
  if (name == "log_cosh" || name == "logcosh") return BootstrapVariant::log_cosh;
  throw std::invalid_argument("unknown bootstrap variant: " + name);
}

int Bootstrap::segments_through_step(int step) const {
  if (step < 0 || step > 7) throw std::invalid_argument("step must be in [0, 7]");
  if (variant == BootstrapVariant::psi_chain_shadow && step >= 2) return step + 1;
  return step;
}

namespace {

// Emits the tanh-pair flow for gain g(alpha) = c*(alpha - gamma) on slots
// (track, aux): d(track) = g - track*aux, d(aux) = g^2 - aux^2.
void emit_pair(ControlSegment& seg, int alpha, int track, int aux, double c, double gamma) {
  seg.add_linear(track, alpha, c);
  seg.add_constant(track, -c * gamma);
  seg.add_quadratic(track, track, aux, -1.0);
  seg.add_quadratic(aux, alpha, alpha, c * c);
  seg.add_linear(aux, alpha, -2.0 * c * c * gamma);
  seg.add_constant(aux, c * c * gamma * gamma);
  seg.add_quadratic(aux, aux, aux, -1.0);
}

Bootstrap build_psi_chain(int dim, const PartitionParams& p, double delta_shift,
                          BootstrapVariant variant) {
  const int N = p.N;
  const double c = p.sharpness;
  StateLayout lay{dim, N, variant == BootstrapVariant::psi_chain_shadow};
  Bootstrap out{lay, {}, variant, p, delta_shift};

  // stage 1: tanh pairs on (lambda, mu); lambda_{j,0} ramps to 1
  ControlSegment s1;
  for (int j = 0; j < dim; ++j) {
    s1.add_constant(lay.lambda_slot(j, 0), 1.0);
    for (int k = 1; k <= N; ++k) {
      emit_pair(s1, lay.alpha(j), lay.lambda_slot(j, k), lay.mu_slot(j, k), c, p.breakpoint(k));
      if (lay.shadow) {
        const int sh = lay.shadow_slot(j, k);
        s1.add_linear(sh, lay.alpha(j), c);
        s1.add_constant(sh, -c * p.breakpoint(k));
        s1.add_quadratic(sh, sh, lay.mu_slot(j, k), -1.0);
      }
    }
  }
  out.segments.push_back(std::move(s1));

  if (lay.shadow) {
    // reversal: run stage 1 backwards on (shadow, mu) so mu returns to 0
    ControlSegment sr;
    for (int j = 0; j < dim; ++j) {
      for (int k = 1; k <= N; ++k) {
        const int sh = lay.shadow_slot(j, k);
        const int mu = lay.mu_slot(j, k);
        const double gamma = p.breakpoint(k);
        sr.add_linear(sh, lay.alpha(j), -c);
        sr.add_constant(sh, c * gamma);
        sr.add_quadratic(sh, sh, mu, 1.0);
        sr.add_quadratic(mu, lay.alpha(j), lay.alpha(j), -c * c);
        sr.add_linear(mu, lay.alpha(j), 2.0 * c * c * gamma);
        sr.add_constant(mu, -c * c * gamma * gamma);
        sr.add_quadratic(mu, mu, mu, 1.0);
      }
    }
    out.segments.push_back(std::move(sr));
  }

  // stage 2: linear mix turning the tanh values into psi values
  const Eigen::MatrixXd a = step2_matrix(N);
  const Eigen::VectorXd b = step2_bias(N);
  Step2MuCorrection corr;
  if (variant == BootstrapVariant::psi_chain_mu_fix) corr = step2_mu_correction(N);
  ControlSegment s2;
  for (int j = 0; j < dim; ++j) {
    for (int k = 0; k <= N; ++k) {
      for (int l = k; l <= N; ++l) {
        s2.add_linear(lay.lambda_slot(j, k), lay.lambda_slot(j, l), a(k, l));
      }
      s2.add_constant(lay.lambda_slot(j, k), b(k));
    }
    for (int k = 1; k <= N; ++k) {
      const int mu = lay.mu_slot(j, k);
      const double gamma = p.breakpoint(k);
      if (variant == BootstrapVariant::psi_chain) {
        for (int l = 0; l <= N; ++l) {
          const double w = a(k - 1, l);
          if (w == 0.0) continue;
          s2.add_quadratic(mu, lay.alpha(j), lay.lambda_slot(j, l), c * w);
          s2.add_linear(mu, lay.lambda_slot(j, l), -c * gamma * w);
        }
      } else if (variant == BootstrapVariant::psi_chain_mu_fix) {
        for (int l = 0; l <= N; ++l) {
          const double w = corr.rows(k, l);
          if (w == 0.0) continue;
          s2.add_quadratic(mu, lay.alpha(j), lay.lambda_slot(j, l), c * w);
          s2.add_linear(mu, lay.lambda_slot(j, l), -c * gamma * w);
        }
        const double sk = corr.bias(k);
        s2.add_linear(mu, lay.alpha(j), c * sk);
        s2.add_constant(mu, -c * gamma * sk);
      }
      // shadow variant: mu is already 0 and stays 0
    }
  }
  out.segments.push_back(std::move(s2));

  // stage 3: shifts so every log input is positive
  ControlSegment s3;
  for (int j = 0; j < dim; ++j) {
    s3.add_constant(lay.alpha(j), delta_shift - 1.0);
    for (int k = 0; k <= N; ++k) s3.add_constant(lay.lambda_slot(j, k), -1.0);
  }
  out.segments.push_back(std::move(s3));

  // stage 4: log flows into beta and mu
  ControlSegment s4;
  for (int j = 0; j < dim; ++j) {
    s4.add_quadratic(lay.alpha(j), lay.alpha(j), lay.alpha(j), -1.0);
    s4.add_linear(lay.beta(j), lay.alpha(j), 1.0);
    for (int k = 0; k <= N; ++k) {
      const int ls = lay.lambda_slot(j, k);
      s4.add_quadratic(ls, ls, ls, -1.0);
      s4.add_linear(lay.mu_slot(j, k), ls, 1.0);
    }
  }
  out.segments.push_back(std::move(s4));

  // stages 5-7: restore, +1, renormalize to 1
  ControlSegment s5;
  for (int j = 0; j < dim; ++j) {
    s5.add_quadratic(lay.alpha(j), lay.beta(j), lay.alpha(j), 1.0);
    for (int k = 0; k <= N; ++k) {
      s5.add_quadratic(lay.lambda_slot(j, k), lay.mu_slot(j, k), lay.lambda_slot(j, k), 1.0);
    }
  }
  out.segments.push_back(std::move(s5));

  ControlSegment s6;
  for (int j = 0; j < dim; ++j) {
    s6.add_constant(lay.alpha(j), 1.0);
    for (int k = 0; k <= N; ++k) s6.add_constant(lay.lambda_slot(j, k), 1.0);
  }
  out.segments.push_back(std::move(s6));

  ControlSegment s7;
  for (int j = 0; j < dim; ++j) {
    s7.add_quadratic(lay.alpha(j), lay.beta(j), lay.alpha(j), -1.0);
    for (int k = 0; k <= N; ++k) {
      s7.add_quadratic(lay.lambda_slot(j, k), lay.mu_slot(j, k), lay.lambda_slot(j, k), -1.0);
    }
  }
  out.segments.push_back(std::move(s7));
  return out;
}

Bootstrap build_log_cosh(int dim, const PartitionParams& p, double delta_shift) {
  const int N = p.N;
  const double c = p.sharpness;
  StateLayout lay{dim, N, false};
  Bootstrap out{lay, {}, BootstrapVariant::log_cosh, p, delta_shift};

  // Which pair trajectories each mu slot taps: interior k needs lncosh of
  // gains k and k+1, the edges need one each (sech-product identity for psi).
  auto taps = [N](int k) {
    std::vector<int> m;
    if (k == 0) m = {1};
    else if (k == N) m = {N};
    else m = {k, k + 1};
    return m;
  };
  std::vector<int> odd, even;
  for (int m = 1; m <= N; ++m) (m % 2 ? odd : even).push_back(m);

  // Pair hardware lives in the lambda bank; aux slot index per round.
  auto run_round = [&](ControlSegment& seg, const std::vector<int>& round, int j,
                       std::vector<int>& aux_of) {
    int hw = 0;
    for (int m : round) {
      const int track = lay.lambda_slot(j, hw);
      const int aux = lay.lambda_slot(j, hw + 1);
      hw += 2;
      emit_pair(seg, lay.alpha(j), track, aux, c, p.breakpoint(m));
      aux_of[m] = aux;
    }
  };
  auto decay_round = [&](ControlSegment& seg, const std::vector<int>& round, int j) {
    for (int h = 0; h < 2 * static_cast<int>(round.size()); ++h) {
      seg.add_linear(lay.lambda_slot(j, h), lay.lambda_slot(j, h), -kDecayRate);
    }
  };

  // segment 1: odd-gain pairs + their lncosh taps + every affine part of mu
  ControlSegment s1;
  for (int j = 0; j < dim; ++j) {
    std::vector<int> aux_of(N + 1, -1);
    run_round(s1, odd, j, aux_of);
    for (int k = 0; k <= N; ++k) {
      const int mu = lay.mu_slot(j, k);
      for (int m : taps(k)) {
        if (aux_of[m] >= 0) s1.add_linear(mu, aux_of[m], -1.0);
      }
      if (k == 0) {
        s1.add_linear(mu, lay.alpha(j), -c);
        s1.add_constant(mu, -kLn2 + c * p.breakpoint(1));
      } else if (k == N) {
        s1.add_linear(mu, lay.alpha(j), c);
        s1.add_constant(mu, -kLn2 - c * p.breakpoint(N));
      } else {
        s1.add_constant(mu, log_sinh(c / N) - kLn2);
      }
    }
  }
  out.segments.push_back(std::move(s1));

  // segment 2: clear the odd-round hardware
  ControlSegment s2;
  for (int j = 0; j < dim; ++j) decay_round(s2, odd, j);
  out.segments.push_back(std::move(s2));

  // segment 3: even-gain pairs + their taps; alpha begins its shift
  ControlSegment s3;
  for (int j = 0; j < dim; ++j) {
    std::vector<int> aux_of(N + 1, -1);
    run_round(s3, even, j, aux_of);
    for (int k = 0; k <= N; ++k) {
      for (int m : taps(k)) {
        if (aux_of[m] >= 0) s3.add_linear(lay.mu_slot(j, k), aux_of[m], -1.0);
      }
    }
    s3.add_constant(lay.alpha(j), delta_shift - 1.0);
  }
  out.segments.push_back(std::move(s3));

  // segment 4: clear the even-round hardware; log flow for alpha into beta
  ControlSegment s4;
  for (int j = 0; j < dim; ++j) {
    decay_round(s4, even, j);
    s4.add_quadratic(lay.alpha(j), lay.alpha(j), lay.alpha(j), -1.0);
    s4.add_linear(lay.beta(j), lay.alpha(j), 1.0);
  }
  out.segments.push_back(std::move(s4));

  // segments 5-7: restore alpha, raise every working slot to 1, renormalize
  ControlSegment s5;
  for (int j = 0; j < dim; ++j) {
    s5.add_quadratic(lay.alpha(j), lay.beta(j), lay.alpha(j), 1.0);
  }
  out.segments.push_back(std::move(s5));

  ControlSegment s6;
  for (int j = 0; j < dim; ++j) {
    s6.add_constant(lay.alpha(j), 1.0);
    for (int k = 0; k <= N; ++k) s6.add_constant(lay.lambda_slot(j, k), 1.0);
  }
  out.segments.push_back(std::move(s6));

  ControlSegment s7;
  for (int j = 0; j < dim; ++j) {
    s7.add_quadratic(lay.alpha(j), lay.beta(j), lay.alpha(j), -1.0);
  }
  out.segments.push_back(std::move(s7));
  return out;
}

}  // namespace

Bootstrap build_bootstrap(int dim, const PartitionParams& p, double delta_shift,
                          BootstrapVariant variant) {
  if (dim < 1) throw std::invalid_argument("build_bootstrap: dim must be >= 1");
  p.validate();
  if (!(delta_shift > 0.0)) {
    throw std::invalid_argument("build_bootstrap: delta_shift must be positive");
  }
  if (variant == BootstrapVariant::log_cosh) return build_log_cosh(dim, p, delta_shift);
  return build_psi_chain(dim, p, delta_shift, variant);
}

std::vector<double> expected_state_after_step(int step, std::span<const double> x,
                                              const PartitionParams& p, double delta_shift,
                                              const StateLayout& lay) {
  if (step < 0 || step > 7) throw std::invalid_argument("step must be in [0, 7]");
  if (static_cast<int>(x.size()) != lay.dim) {
    throw std::invalid_argument("expected_state_after_step: wrong input dimension");
  }
  const int N = lay.N;
  const double c = p.sharpness;
  const double delta = delta_shift;
  std::vector<double> y(static_cast<std::size_t>(lay.width()), 0.0);

  for (int j = 0; j < lay.dim; ++j) {
    const double xj = x[j];
    auto g = [&](int k) { return c * (xj - p.breakpoint(k)); };
    auto lnpsi = [&](int k) { return log_psi_eval(k, xj, p); };
    auto psi = [&](int k) { return psi_eval(k, xj, p); };

    switch (step) {
      case 0:
        y[lay.alpha(j)] = xj;
        break;
      case 1:
        y[lay.alpha(j)] = xj;
        y[lay.lambda_slot(j, 0)] = 1.0;
        for (int k = 1; k <= N; ++k) {
          y[lay.lambda_slot(j, k)] = std::tanh(g(k));
          y[lay.mu_slot(j, k)] = g(k) * std::tanh(g(k));
          if (lay.shadow) y[lay.shadow_slot(j, k)] = std::tanh(g(k));
        }
        break;
      case 2:
        y[lay.alpha(j)] = xj;
        for (int k = 0; k <= N; ++k) y[lay.lambda_slot(j, k)] = psi(k);
        break;
      case 3:
        y[lay.alpha(j)] = xj + delta - 1.0;
        for (int k = 0; k <= N; ++k) y[lay.lambda_slot(j, k)] = psi(k) - 1.0;
        break;
      case 4:
        y[lay.alpha(j)] = (xj + delta - 1.0) / (xj + delta);
        y[lay.beta(j)] = std::log(xj + delta);
        for (int k = 0; k <= N; ++k) {
          y[lay.lambda_slot(j, k)] = -std::expm1(-lnpsi(k));  // (psi-1)/psi, stably
          y[lay.mu_slot(j, k)] = lnpsi(k);
        }
        break;
      case 5:
        y[lay.alpha(j)] = xj + delta - 1.0;
        y[lay.beta(j)] = std::log(xj + delta);
        for (int k = 0; k <= N; ++k) {
          y[lay.lambda_slot(j, k)] = std::expm1(lnpsi(k));  // psi - 1
          y[lay.mu_slot(j, k)] = lnpsi(k);
        }
        break;
      case 6:
        y[lay.alpha(j)] = xj + delta;
        y[lay.beta(j)] = std::log(xj + delta);
        for (int k = 0; k <= N; ++k) {
          y[lay.lambda_slot(j, k)] = psi(k);
          y[lay.mu_slot(j, k)] = lnpsi(k);
        }
        break;
      case 7:
        y[lay.alpha(j)] = 1.0;
        y[lay.beta(j)] = std::log(xj + delta);
        for (int k = 0; k <= N; ++k) {
          y[lay.lambda_slot(j, k)] = 1.0;
          y[lay.mu_slot(j, k)] = lnpsi(k);
        }
        break;
    }
  }
  return y;
}

}  // namespace qode
