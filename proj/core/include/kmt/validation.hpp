// Ground-truth machinery: brute-force Wasserstein distances on tiny
// instances, the randomized probability integral transform, and the
// executable dyadic coupling for binary alphabets.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kmt/special_functions.hpp"

namespace kmt {

struct FiniteDistribution {
  struct Atom {
    double value;
    double prob;
  };
  std::vector<Atom> atoms;  // strictly increasing values, probs sum to 1

  static FiniteDistribution from_weights(std::vector<double> values,
                                         std::vector<double> probs);
  // Uniform law of a multiset (repeated values merge).
  static FiniteDistribution from_multiset(const std::vector<double>& values);

  double mean() const;
  double variance() const;
  void validate() const;
};

// sigma * Phi^{-1}(F(x^-) + u * p(x)); exactly N(0, sigma^2) over random (X,U).
// The clamped flag reports a numerical clamp of the uniformized CDF value.
double randomized_pit(const FiniteDistribution& dist, double x, double u,
                      double target_sigma, bool* clamped = nullptr);

// W_p(discrete, N(0, sd^2)) by quantile-coupling quadrature with atom-boundary
// splitting; rel_tol scales the adaptive tolerance (self-consistency knob).
double wasserstein_discrete_gaussian(const FiniteDistribution& dist, double sd,
                                     double p, double rel_tol = 1e-10);

// Conditional law of W_k given the multiset (all C(n,k) subsets), W_p against
// N(0, sigma^2 k(n-k)/n). sigma defaults to the multiset population sd.
double brute_force_conditional_wp(const std::vector<double>& multiset, std::size_t k,
                                  double p, std::optional<double> sigma = {},
                                  double rel_tol = 1e-10);

// || W_p(W_k, N(0, sigma_nk^2) | multiset) ||_p for n i.i.d. draws from dist:
// enumerates multisets with multinomial weights.
double conditional_wp_norm_bruteforce(const FiniteDistribution& dist, std::size_t n,
                                      std::size_t k, double p);

// Exact law of S_n (centered convolution), W_p against N(0, n sigma^2).
double brute_force_marginal_wp(const FiniteDistribution& dist, std::size_t n, double p,
                               double rel_tol = 1e-10);

// Exact || W_p(W_k, N(0, sigma_nk^2) | multiset) ||_p for the {0, R} alphabet
// at any n: given c successes the bridge value is R (h - k c / n) with h
// hypergeometric, so no enumeration is needed.
double binary_conditional_wp_norm(std::size_t n, std::size_t k, double success_prob,
                                  double R, double p, double rel_tol = 1e-10);

// Full coupling trace for a binary alphabet {0, R}: (S_k, Z_k), (W_k, Ztilde_k).
struct CouplingTrace {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<double> Y;        // raw observations in {0, R}
  std::vector<double> S;        // centered partial sums
  std::vector<double> W;        // bridge S_k - (k/n) S_n
  std::vector<double> Z;        // coupled Gaussian walk, cov sigma^2 min(i,j)
  std::vector<double> Ztilde;   // coupled Gaussian bridge
  std::vector<double> uniforms; // auxiliary uniforms in consumption order
};

// Recursive hypergeometric midpoint coupling; n must be a power of two.
CouplingTrace binary_dyadic_coupling(std::size_t n, double success_prob, double R,
                                     std::uint64_t seed);

// Hypergeometric pmf/cdf helpers (log-space inside).
double hypergeometric_pmf(std::size_t population, std::size_t successes,
                          std::size_t draws, std::size_t h);
double binomial_pmf(std::size_t n, double q, std::size_t j);

}  // namespace kmt
