#include "kmt/hitting_time.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "kmt/rng.hpp"

namespace kmt {

void HittingTimeProblem::validate() const {
  if (N < 1) throw std::domain_error("HittingTimeProblem: N < 1");
  if (!(R > 0.0)) throw std::domain_error("HittingTimeProblem: R <= 0");
  if (std::abs(mu_N) > R / 2.0)
    throw std::domain_error("HittingTimeProblem: |mu_N| must be <= R/2");
  if (!(sigma_N > 0.0 && sigma_N <= R / 2.0))
    throw std::domain_error("HittingTimeProblem: sigma_N must lie in (0, R/2]");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("HittingTimeProblem: alpha outside (0,1)");
  if (!boundary.empty() && boundary.size() < N)
    throw std::domain_error("HittingTimeProblem: boundary shorter than N");
}

CrossingEstimate stay_probability(const std::vector<double>& barrier,
                                  std::size_t paths, std::uint64_t seed, int threads) {
  if (barrier.empty()) throw std::domain_error("stay_probability: empty barrier");
  if (paths == 0) throw std::domain_error("stay_probability: needs paths");
  const std::size_t N = barrier.size();
  const int workers = std::max(1, threads);
  std::vector<std::size_t> stays(workers, 0);

  auto run_range = [&](int w, std::size_t lo, std::size_t hi) {
    std::size_t count = 0;
    for (std::size_t path = lo; path < hi; ++path) {
      std::mt19937_64 rng = make_stream(seed, path);
      std::normal_distribution<double> gauss(0.0, 1.0);
      double b = 0.0;
      bool stayed = true;
      for (std::size_t i = 0; i < N; ++i) {
        b += gauss(rng);
        if (b > barrier[i]) {
          stayed = false;
          break;
        }
      }
      if (stayed) ++count;
    }
    stays[w] = count;
  };

  if (workers == 1) {
    run_range(0, 0, paths);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (paths + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t lo = std::min(paths, std::size_t(w) * chunk);
      const std::size_t hi = std::min(paths, lo + chunk);
      pool.emplace_back(run_range, w, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  std::size_t total = 0;
  for (std::size_t c : stays) total += c;
  CrossingEstimate est;
  est.paths = paths;
  est.seed = seed;
  est.point = double(total) / double(paths);
  est.ci_halfwidth =
      2.5758293035489 * std::sqrt(std::max(est.point * (1.0 - est.point), 1e-12) /
                                  double(paths));
  return est;
}

HittingBoundResult hitting_bound(const HittingTimeProblem& problem,
                                 const BoundSearchConfig& cfg, std::size_t paths,
                                 std::uint64_t seed, int threads,
                                 bool force_zero_schedule) {
  problem.validate();
  const std::size_t n2 = std::size_t(1) << ceil_log2(problem.N);

  HittingBoundResult out;
  if (force_zero_schedule) {
    out.schedule.n = n2;
    out.schedule.kind = ScheduleKind::sum;
    out.schedule.alpha = problem.alpha;
    out.schedule.values.assign(n2, 0.0);
  } else {
    // The X -> Y = X + R/2 recentering puts the array in [0, R] with the same
    // deviations, so the (R, sigma_N) schedule applies unchanged.
    BoundedModel model(problem.R, problem.sigma_N);
    WassersteinEvaluator ev(model, cfg);
    out.schedule = build_sum_schedule(ev, n2, problem.alpha);
  }

  std::vector<double> barrier(problem.N, 0.0);
  for (std::size_t i = 1; i <= problem.N; ++i) {
    barrier[i - 1] = (problem.boundary_at(i) - double(i) * problem.mu_N +
                      out.schedule.values[i - 1]) /
                     problem.sigma_N;
  }
  out.crossing = stay_probability(barrier, paths, seed, threads);
  out.bound = problem.alpha + out.crossing.point;
  out.trivial = out.bound >= 1.0;
  return out;
}

MinNontrivialResult min_nontrivial_N(double mu, double g, double R, double sigma,
                                     const BoundSearchConfig& cfg, std::size_t paths,
                                     std::uint64_t seed, int threads,
                                     std::size_t N_max) {
  if (!(mu < 0.0)) throw std::domain_error("min_nontrivial_N: mu must be negative");
  MinNontrivialResult res;
  res.mu = mu;
  res.g = g;

  const std::size_t scan_paths = std::max<std::size_t>(paths / 10, 2000);
  auto evaluate = [&](std::size_t N, std::size_t n_paths) {
    HittingTimeProblem problem;
    problem.N = N;
    problem.R = R;
    problem.sigma_N = sigma;
    problem.mu_N = mu / std::sqrt(double(N));
    problem.alpha = 1.0 / double(N);
    problem.g_const = g;
    return hitting_bound(problem, cfg, n_paths, seed, threads);
  };

  for (std::size_t N = 4; N <= N_max; N <<= 1) {
    HittingBoundResult scan = evaluate(N, scan_paths);
    if (scan.bound + scan.crossing.ci_halfwidth < 1.0) {
      HittingBoundResult confirm = evaluate(N, paths);
      if (confirm.bound + confirm.crossing.ci_halfwidth < 1.0) {
        res.N = N;
        res.found = true;
        res.bound = confirm.bound;
        res.ci_halfwidth = confirm.crossing.ci_halfwidth;
        return res;
      }
    }
  }
  res.found = false;
  return res;
}

}  // namespace kmt
