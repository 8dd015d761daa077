#include "qode/sobolev.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <stdexcept>

namespace qode {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
  return b;
}

}  // namespace

namespace {

// Recursive central differences, one coordinate at a time.
struct CentralDifference {
  std::function<double(std::span<const double>)> f;
  double step;

  double eval(std::span<const int> alpha, std::span<const double> x) const {
    int j = -1;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      if (alpha[i] > 0) {
        j = static_cast<int>(i);
        break;
      }
    }
    if (j < 0) return f(x);
    std::vector<int> a(alpha.begin(), alpha.end());
    a[j] -= 1;
    std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
    xp[j] += step;
    xm[j] -= step;
    return (eval(a, xp) - eval(a, xm)) / (2.0 * step);
  }
};

}  // namespace

SmoothTarget finite_difference_target(std::string name, int dim,
                                      std::function<double(std::span<const double>)> f,
                                      double step) {
  SmoothTarget t;
  t.name = std::move(name);
  t.dim = dim;
  t.max_order = 3;  // central differences are not trustworthy much deeper
  t.value = f;
  auto fd = std::make_shared<CentralDifference>(CentralDifference{f, step});
  t.partial = [fd](std::span<const int> alpha, std::span<const double> x) {
    return fd->eval(alpha, x);
  };
  return t;
}

SobolevParameters choose_parameters(int order, int dim, double eps, double gamma) {
  if (order < 1) throw std::invalid_argument("choose_parameters: order must be >= 1");
  if (dim < 1) throw std::invalid_argument("choose_parameters: dim must be >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("choose_parameters: eps must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("choose_parameters: gamma must be in (0,1)");
  }
  const double n_fact = factorial(order);
  const double d_pow = std::pow(static_cast<double>(dim), order);
  const double core = (n_fact / d_pow) * gamma * eps / std::pow(2.0, dim);
  SobolevParameters p;
  p.N = std::max(1, static_cast<int>(std::ceil(std::pow(core, -1.0 / order))));
  const double cells = std::pow(static_cast<double>(p.N + 1), dim) - std::pow(2.0, dim);
  double delta = (n_fact / d_pow) * (1.0 - gamma) * eps / cells;
  if (!(delta > 0.0)) throw std::invalid_argument("choose_parameters: derived delta is not positive");
  p.delta = std::min(delta, 0.499);
  p.sharpness = PartitionParams::min_sharpness(p.N, p.delta);
  return p;
}

double error_bound(int order, int dim, int N, double delta) {
  const double lead = std::pow(static_cast<double>(dim), order) / factorial(order);
  const double cells = std::pow(static_cast<double>(N + 1), dim) - std::pow(2.0, dim);
  return lead * (std::pow(2.0, dim) * std::pow(static_cast<double>(N), -order) + cells * delta);
}

SobolevConfig SobolevConfig::make(int order, int dim, double eps, double gamma,
                                  double delta_shift) {
  if (!(delta_shift > 0.0)) {
    throw std::invalid_argument("SobolevConfig: delta_shift must be positive");
  }
  SobolevConfig c;
  c.order = order;
  c.dim = dim;
  c.eps = eps;
  c.gamma = gamma;
  c.delta_shift = delta_shift;
  c.params = choose_parameters(order, dim, eps, gamma);
  return c;
}

std::vector<MultiIndex> multi_indices_below(int dim, int order) {
  std::vector<MultiIndex> out;
  MultiIndex cur(static_cast<std::size_t>(dim), 0);
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == dim) {
      out.push_back(cur);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      cur[pos] = v;
      rec(pos + 1, remaining - v);
    }
    cur[pos] = 0;
  };
  rec(0, order - 1);
  return out;
}

std::vector<MultiIndex> grid_tuples(int dim, int N) {
  std::vector<MultiIndex> out;
  MultiIndex cur(static_cast<std::size_t>(dim), 0);
  while (true) {
    out.push_back(cur);
    int pos = dim - 1;
    while (pos >= 0 && cur[pos] == N) {
      cur[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++cur[pos];
  }
  std::sort(out.begin(), out.end());
  return out;
}

long long monomial_count(int dim, int order) {
  // C(dim + order - 1, dim)
  long long num = 1, den = 1;
  for (int i = 1; i <= dim; ++i) {
    num *= (order - 1 + i);
    den *= i;
  }
  return num / den;
}

std::map<MultiIndex, double> taylor_coefficients(const SmoothTarget& f, const MultiIndex& k,
                                                 int N, int order) {
  if (static_cast<int>(k.size()) != f.dim) {
    throw std::invalid_argument("taylor_coefficients: tuple length != target dim");
  }
  std::vector<double> center(k.size());
  for (std::size_t j = 0; j < k.size(); ++j) center[j] = static_cast<double>(k[j]) / N;
  std::map<MultiIndex, double> out;
  for (const auto& n : multi_indices_below(f.dim, order)) {
    double denom = 1.0;
    for (int nj : n) denom *= factorial(nj);
    out[n] = f.partial(n, center) / denom;
  }
  return out;
}

std::map<MultiIndex, double> recenter(const std::map<MultiIndex, double>& taylor,
                                      const MultiIndex& k, double delta_shift, int N) {
  if (!(delta_shift > 0.0)) throw std::invalid_argument("recenter: delta_shift must be positive");
  const int dim = static_cast<int>(k.size());
  std::vector<double> shift(k.size());  // (x - k/N)^n = ((x+D) - (k/N + D))^n
  for (int j = 0; j < dim; ++j) shift[j] = static_cast<double>(k[j]) / N + delta_shift;

  std::map<MultiIndex, double> out;
  MultiIndex m(static_cast<std::size_t>(dim), 0);
  for (const auto& [n, coeff] : taylor) {
    if (coeff == 0.0) continue;
    std::function<void(int, double)> expand = [&](int pos, double factor) {
      if (pos == dim) {
        out[m] += coeff * factor;
        return;
      }
      for (int mj = n[pos]; mj >= 0; --mj) {
        m[pos] = mj;
        const double f = binomial(n[pos], mj) *
                         std::pow(-shift[pos], static_cast<double>(n[pos] - mj));
        expand(pos + 1, factor * f);
      }
      m[pos] = 0;
    };
    expand(0, 1.0);
  }
  return out;
}

std::vector<Term> recentered_terms(const SmoothTarget& f, const SobolevConfig& config) {
  std::vector<Term> out;
  for (const auto& k : grid_tuples(config.dim, config.params.N)) {
    const auto taylor = taylor_coefficients(f, k, config.params.N, config.order);
    const auto rec = recenter(taylor, k, config.delta_shift, config.params.N);
    for (const auto& [n, a] : rec) {
      if (a != 0.0) out.push_back({k, n, a});
    }
  }
  return out;  // maps iterate lexicographically, tuples are lex-sorted
}

double term_value(const Term& t, std::span<const double> x, const SobolevConfig& config) {
  const PartitionParams part = config.partition();
  double v = t.coeff;
  for (std::size_t j = 0; j < x.size(); ++j) {
    v *= std::pow(x[j] + config.delta_shift, static_cast<double>(t.n[j]));
    v *= psi_eval(t.k[j], x[j], part);
  }
  return v;
}

double direct_fhat_eval(const SmoothTarget& f, const SobolevConfig& config,
                        std::span<const double> x) {
  const PartitionParams part = config.partition();
  double total = 0.0;
  for (const auto& k : grid_tuples(config.dim, config.params.N)) {
    double phi = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) phi *= psi_eval(k[j], x[j], part);
    if (phi == 0.0) continue;
    const auto taylor = taylor_coefficients(f, k, config.params.N, config.order);
    double poly = 0.0;
    for (const auto& [n, coeff] : taylor) {
      double mono = 1.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        mono *= std::pow(x[j] - static_cast<double>(k[j]) / config.params.N,
                         static_cast<double>(n[j]));
      }
      poly += coeff * mono;
    }
    total += phi * poly;
  }
  return total;
}

double direct_partial_sum(std::span<const Term> terms, std::size_t count,
                          std::span<const double> x, const SobolevConfig& config) {
  double total = 0.0;
  for (std::size_t i = 0; i < count && i < terms.size(); ++i) {
    total += term_value(terms[i], x, config);
  }
  return total;
}

namespace {

// Capacity-constrained placement with augmenting paths. Slots carry at most
// `cap` terms; a term's preferred slots are its matching lambda slots and the
// alpha slots.
struct SlotMatcher {
  int cap;
  std::map<int, std::vector<int>> occupants;  // slot -> term indices
  std::map<int, int> slot_of;                 // term -> slot

  bool place(int term, const std::vector<int>& cands,
             const std::function<std::vector<int>(int)>& cands_of) {
    for (int s : cands) {
      if (static_cast<int>(occupants[s].size()) < cap) {
        occupants[s].push_back(term);
        slot_of[term] = s;
        return true;
      }
    }
    std::set<int> visited;
    return augment(term, cands, cands_of, visited);
  }

  bool augment(int term, const std::vector<int>& cands,
               const std::function<std::vector<int>(int)>& cands_of, std::set<int>& visited) {
    for (int s : cands) {
      if (static_cast<int>(occupants[s].size()) < cap) {
        occupants[s].push_back(term);
        slot_of[term] = s;
        return true;
      }
    }
    for (int s : cands) {
      if (visited.count(s)) continue;
      visited.insert(s);
      for (int other : std::vector<int>(occupants[s])) {
        std::vector<int> oc = cands_of(other);
        oc.erase(std::remove(oc.begin(), oc.end(), s), oc.end());
        if (augment(other, oc, cands_of, visited)) {
          auto& v = occupants[s];
          v.erase(std::find(v.begin(), v.end(), other));
          v.push_back(term);
          slot_of[term] = s;
          return true;
        }
      }
    }
    return false;
  }
};

}  // namespace

BatchAssignment assign_batches(const std::vector<Term>& terms, const StateLayout& layout) {
  BatchAssignment out;
  const long long nnz = static_cast<long long>(terms.size());
  if (nnz == 0) return out;
  const int B = (layout.N + 2) * layout.dim;
  const int target_segments =
      static_cast<int>((2 * nnz + B - 1) / B);  // ceil(2 nnz / B)
  const int n_batches = (target_segments + 1) / 2;
  out.fused_final = (target_segments % 2) == 1;

  auto cands_of = [&](int ti) {
    std::vector<int> c;
    for (int j = 0; j < layout.dim; ++j) c.push_back(layout.lambda_slot(j, terms[ti].k[j]));
    for (int j = 0; j < layout.dim; ++j) c.push_back(layout.alpha(j));
    return c;
  };

  SlotMatcher matcher{n_batches, {}, {}};
  std::vector<int> spill;
  for (int ti = 0; ti < static_cast<int>(terms.size()); ++ti) {
    if (!matcher.place(ti, cands_of(ti), cands_of)) spill.push_back(ti);
  }
  if (!spill.empty()) {
    // fall back to any slot with spare capacity (keeps the segment count)
    std::vector<int> all;
    for (int j = 0; j < layout.dim; ++j) {
      all.push_back(layout.alpha(j));
      for (int k = 0; k <= layout.N; ++k) all.push_back(layout.lambda_slot(j, k));
    }
    for (int ti : spill) {
      bool ok = false;
      for (int s : all) {
        if (static_cast<int>(matcher.occupants[s].size()) < n_batches) {
          matcher.occupants[s].push_back(ti);
          matcher.slot_of[ti] = s;
          ok = true;
          break;
        }
      }
      if (!ok) throw std::logic_error("assign_batches: capacity accounting failed");
    }
    out.unmatched = static_cast<int>(spill.size());
  }

  out.batches.assign(static_cast<std::size_t>(n_batches), {});
  for (const auto& [slot, list] : matcher.occupants) {
    for (std::size_t pos = 0; pos < list.size(); ++pos) {
      out.batches[pos].push_back({list[pos], slot});
    }
  }
  for (auto& b : out.batches) {
    std::sort(b.begin(), b.end(),
              [](const BatchAssignment::Placement& a, const BatchAssignment::Placement& b2) {
                return a.term < b2.term;
              });
  }
  if (out.batches.back().empty()) {
    throw std::logic_error("assign_batches: empty final batch");
  }
  return out;
}

SobolevCompileResult compile_sobolev(const SmoothTarget& f, const SobolevConfig& config,
                                     BootstrapVariant variant) {
  if (f.dim != config.dim) {
    throw std::invalid_argument("compile_sobolev: target dim " + std::to_string(f.dim) +
                                " != config dim " + std::to_string(config.dim));
  }
  if (config.order > f.max_order) {
    throw std::invalid_argument("compile_sobolev: target '" + f.name +
                                "' certifies the unit Sobolev bound only up to order " +
                                std::to_string(f.max_order));
  }
  if (variant == BootstrapVariant::psi_chain) {
    throw std::invalid_argument(
        "compile_sobolev: the psi_chain variant leaves a nonzero mu block after stage 2 "
        "(see `check --suite bootstrap`); use psi_chain_mu_fix, psi_chain_shadow or log_cosh");
  }

  SobolevCompileResult res;
  res.config = config;
  res.variant = variant;

  Bootstrap boot = build_bootstrap(config.dim, config.partition(), config.delta_shift, variant);
  res.layout = boot.layout;

  const auto terms = recentered_terms(f, config);
  res.term_count_total =
      monomial_count(config.dim, config.order) *
      static_cast<long long>(std::llround(std::pow(config.params.N + 1.0, config.dim)));
  res.term_count_nonzero = static_cast<long long>(terms.size());
  const int B = (config.params.N + 2) * config.dim;
  res.worst_case_segments = 7 + static_cast<int>((2 * res.term_count_total + B - 1) / B);
  res.bound = error_bound(config.order, config.dim, config.params.N, config.params.delta);

  if (config.params.delta < 1e-12) {
    res.warnings.push_back("delta below 1e-12: partition tails are at the limit of double "
                           "precision");
  }
  const double ln_psi_floor = -2.0 * config.params.sharpness * (1.0 - 1.0 / (2.0 * config.params.N));
  if (ln_psi_floor < -700.0) {
    res.warnings.push_back("partition values underflow doubles at the domain edges");
  }

  res.assignment = assign_batches(terms, boot.layout);
  if (res.assignment.unmatched > 0) {
    res.warnings.push_back(std::to_string(res.assignment.unmatched) +
                           " term(s) placed on non-matching slots");
  }

  ControlSchedule sched;
  sched.width = boot.layout.width();
  sched.input_dim = config.dim;
  sched.segments = boot.segments;
  const int sum = boot.layout.sum_slot();

  // Each batch runs its product flows from slots holding 1 and the paired
  // accumulate segment reads the finished values with a gain-compensated tap
  // while resetting the slots toward 1:
  //   d(slot) = r (1 - slot),  d(sum) += s*kappa*slot + s*(1 - kappa),
  // kappa = r/(1-e^{-r}), so sum gains exactly s * slot(start). Resetting
  // instead of dividing out the previous occupant keeps every product flow's
  // dynamic range one-sided; a divide-out chain amplifies the integrator's
  // absolute-error floor by e^{+swing} when off-support factors swing.
  constexpr double kResetRate = 50.0;
  const double kappa = kResetRate / (-std::expm1(-kResetRate));

  const auto& batches = res.assignment.batches;
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    const bool fused = res.assignment.fused_final && bi + 1 == batches.size();
    ControlSegment mul_seg;
    ControlSegment acc_seg;
    double sum_constant = 0.0;

    for (const auto& pl : batches[bi]) {
      const Term& t = terms[static_cast<std::size_t>(pl.term)];
      const double sign = t.coeff > 0 ? 1.0 : -1.0;
      const double log_abs = std::log(std::abs(t.coeff));

      auto emit = [&](ControlSegment& seg, int row, double scale) {
        for (int j = 0; j < config.dim; ++j) {
          if (t.n[j] != 0) {
            seg.add_quadratic(row, boot.layout.beta(j), pl.slot,
                              scale * static_cast<double>(t.n[j]));
          }
          seg.add_quadratic(row, boot.layout.mu_slot(j, t.k[j]), pl.slot, scale);
        }
        if (log_abs != 0.0) seg.add_linear(row, pl.slot, scale * log_abs);
      };

      emit(mul_seg, pl.slot, 1.0);
      if (fused) {
        // one segment forms the value and adds it: sum += s*(v(1)-v(0)) + s*1
        emit(mul_seg, sum, sign);
        sum_constant += sign;
      } else {
        acc_seg.add_linear(sum, pl.slot, sign * kappa);
        acc_seg.add_linear(pl.slot, pl.slot, -kResetRate);
        acc_seg.add_constant(pl.slot, kResetRate);
        sum_constant += sign * (1.0 - kappa);
      }
    }

    if (fused) {
      mul_seg.add_constant(sum, sum_constant);
      sched.segments.push_back(std::move(mul_seg));
    } else {
      acc_seg.add_constant(sum, sum_constant);
      sched.segments.push_back(std::move(mul_seg));
      sched.segments.push_back(std::move(acc_seg));
    }
  }

  sched.readout = {{sum, 1.0}};
  sched.validate();
  res.schedule = std::move(sched);
  return res;
}

}  // namespace qode
