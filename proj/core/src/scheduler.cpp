#include "kmt/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kmt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::size_t ceil_log2(std::size_t n) {
  if (n == 0) throw std::domain_error("ceil_log2: n == 0");
  std::size_t L = 0;
  std::size_t v = 1;
  while (v < n) {
    v <<= 1;
    ++L;
  }
  return L;
}

double ThresholdSchedule::max_value() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

void ThresholdSchedule::write_csv(std::ostream& os) const {
  os << "k,value\n";
  for (std::size_t k = 1; k <= values.size(); ++k) os << k << ',' << values[k - 1] << '\n';
}

VariantConfig VariantConfig::geometric(double beta, std::size_t L) {
  if (!(beta > 1.0)) throw std::domain_error("VariantConfig: beta must exceed 1");
  VariantConfig v;
  v.level_weights.reserve(L);
  double w = beta;
  for (std::size_t l = 0; l < L; ++l) {
    v.level_weights.push_back(w);
    w *= beta;
  }
  return v;
}

double VariantConfig::weight(std::size_t level) const {
  if (level_weights.empty()) return 1.0;
  const std::size_t idx = std::min(level - 1, level_weights.size() - 1);
  const double w = level_weights[idx];
  if (!(w > 0.0)) throw std::domain_error("VariantConfig: weights must be positive");
  return w;
}

BetaSequence beta_sequence(double nu0, std::size_t L, const VariantConfig* variant) {
  if (nu0 < 0.0 || nu0 > 1.0) throw std::domain_error("beta_sequence: nu0 outside [0,1]");
  BetaSequence seq;
  seq.nu0 = nu0;
  seq.betas.assign(L + 1, 0.0);
  for (std::size_t l = 1; l <= L; ++l) {
    const double w = variant ? variant->weight(l) : 1.0;
    const double prev = seq.betas[l - 1];
    seq.betas[l] = 2.0 * prev - prev * prev + w * nu0;
  }
  return seq;
}

double find_nu0_star(double alpha, std::size_t L, const VariantConfig* variant) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("find_nu0_star: alpha outside (0,1)");
  if (L == 0) return 1.0;  // beta_0 == 0 regardless of nu0
  auto beta_L = [&](double nu0) { return beta_sequence(nu0, L, variant).betas[L]; };
  double lo = 0.0, hi = std::min(1.0, alpha);
  if (beta_L(hi) <= alpha) return hi;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (beta_L(mid) <= alpha)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

std::vector<double> bridge_from_midpoints(const std::vector<double>& midpoints) {
  const std::size_t L = midpoints.size();
  std::vector<double> prev{0.0};  // level 0: delta at k=1 is 0
  for (std::size_t M = 1; M <= L; ++M) {
    const std::size_t len = std::size_t(1) << M;
    const std::size_t half = len >> 1;
    const double mid = midpoints[M - 1];
    std::vector<double> cur(len, 0.0);
    cur[half - 1] = mid;
    for (std::size_t k = 1; k < half; ++k)
      cur[k - 1] = prev[k - 1] + double(k) / double(half) * mid;
    for (std::size_t k = half + 1; k < len; ++k)
      cur[k - 1] = prev[len - k - 1] + double(len - k) / double(half) * mid;
    cur[len - 1] = 0.0;
    prev.swap(cur);
  }
  return prev;
}

double zeta_fallback(std::size_t half_n, const BoundedModel& model, double budget) {
  if (!(budget > 0.0 && budget < 1.0))
    throw std::domain_error("zeta_fallback: budget outside (0,1)");
  const double n = 2.0 * double(half_n);
  const double z = std::max(0.0, normal_quantile(1.0 - budget));
  return double(half_n) * model.R_s + model.sigma * std::sqrt(n) / 2.0 * z;
}

namespace {

// Midpoint values delta^M(2^(M-1)) for M = 1..L at per-level budgets.
std::vector<double> level_midpoints(const WassersteinEvaluator& ev, std::size_t L,
                                    double nu0, const VariantConfig* variant) {
  const std::vector<int> p_grid = ev.config().p_grid();
  std::vector<double> mids(L, 0.0);
  for (std::size_t M = 1; M <= L; ++M) {
    const double budget = (variant ? variant->weight(M) : 1.0) * nu0;
    double best = kInf;
    for (int p : p_grid) {
      const double omega = ev.omega_conditional(std::size_t(1) << M,
                                                std::size_t(1) << (M - 1), p)
                               .value;
      best = std::min(best, omega / std::pow(budget, 1.0 / p));
    }
    if (variant && variant->zeta_enabled) {
      best = std::min(best, zeta_fallback(std::size_t(1) << (M - 1), ev.model(),
                                          std::min(budget, 1.0 - 1e-12)));
    }
    mids[M - 1] = best;
  }
  return mids;
}

}  // namespace

ThresholdSchedule build_bridge_schedule(const WassersteinEvaluator& ev, std::size_t n,
                                        double alpha, const VariantConfig* variant) {
  if (n < 1) throw std::domain_error("build_bridge_schedule: n < 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("build_bridge_schedule: alpha outside (0,1)");
  const std::size_t L = ceil_log2(n);
  ThresholdSchedule sched;
  sched.n = n;
  sched.L = L;
  sched.alpha = alpha;
  sched.kind = ScheduleKind::bridge;
  sched.meta.nu0_star = find_nu0_star(alpha, L, variant);
  if (L == 0) {
    sched.values = {0.0};
    return sched;
  }
  if (!(sched.meta.nu0_star > 0.0))
    throw std::runtime_error("build_bridge_schedule: budget infeasible");
  sched.meta.per_level_midpoints =
      level_midpoints(ev, L, sched.meta.nu0_star, variant);
  std::vector<double> full = bridge_from_midpoints(sched.meta.per_level_midpoints);
  full.resize(n);  // computed on [1, 2^L], truncated to the first n indices
  sched.values = std::move(full);
  return sched;
}

ThresholdSchedule build_sum_schedule(const WassersteinEvaluator& ev, std::size_t n,
                                     double alpha, const SumSplitConfig& split,
                                     const VariantConfig* variant) {
  if (n < 1 || (n & (n - 1)) != 0)
    throw std::domain_error("build_sum_schedule: n must be a power of two");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("build_sum_schedule: alpha outside (0,1)");
  const std::size_t L = ceil_log2(n);
  const std::vector<int> p_grid = ev.config().p_grid();

  auto delta_star = [&](double alpha1) {
    double best = kInf;
    for (int p : p_grid)
      best = std::min(best, ev.marginal_bound(n, p) / std::pow(alpha1, 1.0 / p));
    return best;
  };

  // max_k D_k for a candidate split; the level recursion is cheap to re-run
  // per candidate because the omega values are cached.
  auto cost = [&](double alpha0) -> double {
    if (!(alpha0 > 0.0 && alpha0 < alpha)) return kInf;
    const double nu0 = find_nu0_star(alpha0, L, variant);
    if (!(nu0 > 0.0)) return kInf;
    const std::vector<double> deltas =
        bridge_from_midpoints(level_midpoints(ev, L, nu0, variant));
    const double ds = delta_star(alpha - alpha0);
    double worst = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      worst = std::max(worst, deltas[k - 1] + double(k) / double(n) * ds);
    }
    return worst;
  };

  // Log-spaced fractions of alpha, ties broken toward larger alpha0.
  double best_alpha0 = alpha / 2.0;
  double best_cost = kInf;
  const double f_lo = std::log(1e-4), f_hi = std::log(1.0 - 1e-4);
  for (std::size_t i = 0; i < split.grid_size; ++i) {
    const double f =
        std::exp(f_lo + (f_hi - f_lo) * double(i) / double(split.grid_size - 1));
    const double a0 = alpha * f;
    const double c = cost(a0);
    if (c < best_cost || (c == best_cost && a0 > best_alpha0)) {
      best_cost = c;
      best_alpha0 = a0;
    }
  }
  {
    // Golden refinement around the grid argmin, in log alpha0.
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    const double step = (f_hi - f_lo) / double(split.grid_size - 1);
    double a = std::max(f_lo, std::log(best_alpha0 / alpha) - step);
    double b = std::min(f_hi, std::log(best_alpha0 / alpha) + step);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double c1 = cost(alpha * std::exp(x1)), c2 = cost(alpha * std::exp(x2));
    for (int it = 0; it < split.golden_iterations; ++it) {
      if (c1 <= c2) {
        b = x2;
        x2 = x1;
        c2 = c1;
        x1 = b - phi * (b - a);
        c1 = cost(alpha * std::exp(x1));
      } else {
        a = x1;
        x1 = x2;
        c1 = c2;
        x2 = a + phi * (b - a);
        c2 = cost(alpha * std::exp(x2));
      }
    }
    const double xa = (c1 <= c2) ? x1 : x2;
    const double ca = std::min(c1, c2);
    const double cand = alpha * std::exp(xa);
    if (ca < best_cost || (ca == best_cost && cand > best_alpha0)) {
      best_cost = ca;
      best_alpha0 = cand;
    }
  }

  ThresholdSchedule sched;
  sched.n = n;
  sched.L = L;
  sched.alpha = alpha;
  sched.kind = ScheduleKind::sum;
  const double alpha1 = alpha - best_alpha0;
  sched.meta.nu0_star = find_nu0_star(best_alpha0, L, variant);
  sched.meta.alpha0_star = best_alpha0;
  sched.meta.alpha1_star = alpha1;
  sched.meta.per_level_midpoints =
      level_midpoints(ev, L, sched.meta.nu0_star, variant);
  const double ds = delta_star(alpha1);
  sched.meta.delta_star = ds;
  sched.values = bridge_from_midpoints(sched.meta.per_level_midpoints);
  for (std::size_t k = 1; k <= n; ++k)
    sched.values[k - 1] += double(k) / double(n) * ds;
  return sched;
}

}  // namespace kmt
