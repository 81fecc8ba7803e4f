// Coupling threshold schedules: Delta_k(alpha) for the bridge process and
// D_k(alpha) for partial sums, plus the level-weight / zeta-fallback variants.
#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kmt/wasserstein_bounds.hpp"

namespace kmt {

enum class ScheduleKind { bridge, sum };

struct ScheduleMeta {
  double nu0_star = 0.0;
  std::optional<double> alpha0_star;
  std::optional<double> alpha1_star;
  std::optional<double> delta_star;
  std::vector<double> per_level_midpoints;  // delta^M at k = 2^(M-1), M = 1..L
};

struct ThresholdSchedule {
  std::size_t n = 0;
  std::size_t L = 0;  // ceil(log2 n)
  double alpha = 0.0;
  ScheduleKind kind = ScheduleKind::bridge;
  std::vector<double> values;  // values[k-1] is the threshold at index k
  ScheduleMeta meta;

  double at(std::size_t k) const { return values.at(k - 1); }
  double max_value() const;
  void write_csv(std::ostream& os) const;
};

struct BetaSequence {
  double nu0 = 0.0;
  std::vector<double> betas;  // beta_0 .. beta_L
};

// Level confidence weights (C_l) and the zeta fallback switch.
struct VariantConfig {
  std::vector<double> level_weights;  // C_1..C_L; shorter vectors repeat last
  bool zeta_enabled = false;

  static VariantConfig geometric(double beta, std::size_t L);
  double weight(std::size_t level) const;
};

struct SumSplitConfig {
  std::size_t grid_size = 64;  // log-spaced alpha0 fractions of alpha
  int golden_iterations = 32;
};

std::size_t ceil_log2(std::size_t n);

// beta_0 = 0, beta_l = 2 beta_{l-1} - beta_{l-1}^2 + nu0 (per-level weights
// multiply nu0 when provided).
BetaSequence beta_sequence(double nu0, std::size_t L,
                           const VariantConfig* variant = nullptr);

// Largest nu0 with beta_L(nu0) <= alpha, bisected to 1e-12.
double find_nu0_star(double alpha, std::size_t L,
                     const VariantConfig* variant = nullptr);

// The dyadic level recursion: midpoints[M-1] is delta^M at k = 2^(M-1);
// returns delta^L at k = 1..2^L (endpoint entries are 0).
std::vector<double> bridge_from_midpoints(const std::vector<double>& midpoints);

// zeta_{half_n}(budget): deterministic range part plus a Gaussian quantile
// allowance for the midpoint surrogate.
double zeta_fallback(std::size_t half_n, const BoundedModel& model, double budget);

ThresholdSchedule build_bridge_schedule(const WassersteinEvaluator& ev, std::size_t n,
                                        double alpha,
                                        const VariantConfig* variant = nullptr);

// n must be a power of two. Optimizes the alpha0 + alpha1 split.
ThresholdSchedule build_sum_schedule(const WassersteinEvaluator& ev, std::size_t n,
                                     double alpha, const SumSplitConfig& split = {},
                                     const VariantConfig* variant = nullptr);

}  // namespace kmt
