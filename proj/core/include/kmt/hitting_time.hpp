// Upper bounds on first-hitting-time probabilities for triangular arrays,
// with Monte-Carlo evaluation of the Brownian stay probability.
#pragma once

#include <cstdint>
#include <vector>

#include "kmt/scheduler.hpp"

namespace kmt {

struct HittingTimeProblem {
  std::size_t N = 0;
  double R = 1.0;
  double mu_N = 0.0;     // per-step drift of X_i^N in [-R/2, R/2]
  double sigma_N = 0.5;  // per-step standard deviation
  double alpha = 0.0;
  double g_const = 0.0;
  std::vector<double> boundary;  // optional tabulated g_i; empty means constant

  double boundary_at(std::size_t i) const {
    return boundary.empty() ? g_const : boundary.at(i - 1);
  }
  void validate() const;
};

struct CrossingEstimate {
  double point = 0.0;         // P(forall i <= N: B_i <= barrier_i)
  double ci_halfwidth = 0.0;  // 99% normal-approximation halfwidth
  std::size_t paths = 0;
  std::uint64_t seed = 0;
};

struct HittingBoundResult {
  double bound = 0.0;  // alpha + crossing.point (may exceed 1)
  bool trivial = false;
  CrossingEstimate crossing;
  ThresholdSchedule schedule;
};

// P(forall i: B_i <= barrier[i]) for an exact integer-time Gaussian walk;
// deterministic given the seed, parallel over per-path streams.
CrossingEstimate stay_probability(const std::vector<double>& barrier,
                                  std::size_t paths, std::uint64_t seed, int threads);

// Prop-style bound: alpha + P(forall i <= N: B_i <= (g_i - i mu + D_i)/sigma).
// The schedule is built at the next power of two and read on [1, N]. Pass
// force_zero_schedule to evaluate the raw Brownian term (test hook).
HittingBoundResult hitting_bound(const HittingTimeProblem& problem,
                                 const BoundSearchConfig& cfg, std::size_t paths,
                                 std::uint64_t seed, int threads,
                                 bool force_zero_schedule = false);

struct MinNontrivialResult {
  double mu = 0.0;
  double g = 0.0;
  std::size_t N = 0;  // power of two, 0 when not found below N_max
  bool found = false;
  double bound = 0.0;
  double ci_halfwidth = 0.0;
};

// Smallest N in {2^j} with bound + ci < 1 under mu_N = mu / sqrt(N) and
// alpha = 1/N. Scans upward with a reduced path count, then confirms the
// candidate at the full path count.
MinNontrivialResult min_nontrivial_N(double mu, double g, double R, double sigma,
                                     const BoundSearchConfig& cfg, std::size_t paths,
                                     std::uint64_t seed, int threads,
                                     std::size_t N_max = std::size_t(1) << 24);

}  // namespace kmt
