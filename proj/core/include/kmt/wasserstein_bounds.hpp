// Computable Wasserstein-p upper bounds for bridges of samples drawn without
// replacement (conditional bound omega_p) and for plain partial sums
// (marginal bounds s_p, S_p, omega_tilde_p).
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "kmt/bounded_model.hpp"
#include "kmt/special_functions.hpp"

namespace kmt {

struct BoundSearchConfig {
  int p_min = 2;
  int p_max = 16;
  std::size_t kappa_grid_size = 24;
  std::vector<int> K_grid = {1, 2, 3, 4, 5, 6, 7, 8};
  HermiteNormMode hermite_mode = HermiteNormMode::numeric_quadrature;

  std::vector<int> p_grid() const {
    std::vector<int> g;
    for (int p = p_min; p <= p_max; ++p) g.push_back(p);
    return g;
  }
};

// Default p grid upper end: the optimal p scales like log(1/alpha).
int default_p_max(double alpha_floor);

enum class BoundBranch { trivial, omega_full };

struct TildeConstants;  // internal marginal-bound constants

struct ConditionalBoundResult {
  double value = 0.0;
  int p = 2;
  double kappa_star = 0.0;
  int K_star = 0;
  BoundBranch branch = BoundBranch::trivial;
};

// sigma * sqrt(k(n-k)/n), the bridge standard deviation.
double sigma_nk(std::size_t n, std::size_t k, const BoundedModel& model);

// Prefactors for the odd/even moment blocks of the conditional bound.
double c_odd(std::size_t n, std::size_t k, int p, const BoundedModel& model);
double c_even(std::size_t n, std::size_t k, int p, const BoundedModel& model);

// Caches omega/omega_tilde evaluations for one (model, config) pair.
// All public members are thread-safe and deterministic.
class WassersteinEvaluator {
 public:
  WassersteinEvaluator(const BoundedModel& model, const BoundSearchConfig& cfg)
      : model_(model), cfg_(cfg) {}

  const BoundedModel& model() const { return model_; }
  const BoundSearchConfig& config() const { return cfg_; }

  // Bound on || W_p( W_k, N(0, sigma_nk^2) | multiset ) ||_p.
  ConditionalBoundResult omega_conditional(std::size_t n, std::size_t k, int p) const;

  // omega at the midpoint k = n/2 for every p in the grid (n even).
  std::map<int, ConditionalBoundResult> omega_midpoint(std::size_t n) const;

  // s_p^R(n, sigma): bound on W_p(S_n, N(0, n sigma^2)).
  double marginal_bound(std::size_t n, int p) const;

  // omega_tilde_p^R(sigma, n), the non-trivial part of the marginal bound.
  double omega_tilde(std::size_t n, int p) const;

  // S_p^{sigma,R}(n, k): marginal-route bound on W_p(W_k, N(0, sigma_nk^2)).
  double s_cond(std::size_t n, std::size_t k, int p) const;

  double hermite_norm(unsigned l, int p) const;

 private:
  double omega_tilde_at(std::size_t n, int p, double Sprime, int K,
                        const std::vector<double>& precomputed_norms) const;
  double omega_tilde_assemble(std::size_t n, int p, double Sprime, int K,
                              const std::vector<double>& norms,
                              const TildeConstants& consts,
                              const std::vector<double>& J1,
                              const std::vector<double>& J2, double Jexp1,
                              double Jexp2, bool finite) const;
  TildeConstants omega_tilde_constants(std::size_t n, int p) const;

  BoundedModel model_;
  BoundSearchConfig cfg_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::size_t, int>, double> tilde_cache_;
  mutable std::map<std::tuple<std::size_t, std::size_t, int>, ConditionalBoundResult>
      cond_cache_;
  mutable std::map<std::pair<unsigned, int>, double> hermite_cache_;
};

// Shared evaluators keyed by the quantized R-tilde of a unit-variance model;
// lets Monte-Carlo harnesses reuse omega caches across many runs.
class EvaluatorPool {
 public:
  explicit EvaluatorPool(const BoundSearchConfig& cfg) : cfg_(cfg) {}
  WassersteinEvaluator& get(double rtilde);
  const BoundSearchConfig& config() const { return cfg_; }

 private:
  BoundSearchConfig cfg_;
  std::mutex mutex_;
  std::map<double, std::unique_ptr<WassersteinEvaluator>> evaluators_;
};

// Round R-tilde up onto the grid {2 * 1.1^j}; valid by R-monotonicity.
double quantize_rtilde_up(double rtilde);

}  // namespace kmt
