#include "kmt/validation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

#include "kmt/rng.hpp"

namespace kmt {

namespace {
constexpr double kMergeTol = 1e-12;
}

FiniteDistribution FiniteDistribution::from_weights(std::vector<double> values,
                                                    std::vector<double> probs) {
  if (values.size() != probs.size() || values.empty())
    throw std::domain_error("FiniteDistribution: size mismatch");
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  FiniteDistribution d;
  for (std::size_t i : order) {
    if (!d.atoms.empty() &&
        values[i] - d.atoms.back().value < kMergeTol * (1.0 + std::abs(values[i]))) {
      d.atoms.back().prob += probs[i];
    } else {
      d.atoms.push_back({values[i], probs[i]});
    }
  }
  d.validate();
  return d;
}

FiniteDistribution FiniteDistribution::from_multiset(const std::vector<double>& values) {
  std::vector<double> probs(values.size(), 1.0 / double(values.size()));
  return from_weights(values, probs);
}

double FiniteDistribution::mean() const {
  double m = 0.0;
  for (const Atom& a : atoms) m += a.value * a.prob;
  return m;
}

double FiniteDistribution::variance() const {
  const double m = mean();
  double v = 0.0;
  for (const Atom& a : atoms) v += (a.value - m) * (a.value - m) * a.prob;
  return v;
}

void FiniteDistribution::validate() const {
  if (atoms.empty()) throw std::domain_error("FiniteDistribution: no atoms");
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].prob < -1e-15) throw std::domain_error("FiniteDistribution: negative prob");
    if (i > 0 && !(atoms[i].value > atoms[i - 1].value))
      throw std::domain_error("FiniteDistribution: values must increase");
    total += atoms[i].prob;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::domain_error("FiniteDistribution: probabilities must sum to 1");
}

double randomized_pit(const FiniteDistribution& dist, double x, double u,
                      double target_sigma, bool* clamped) {
  double below = 0.0, at = -1.0;
  for (const auto& a : dist.atoms) {
    if (a.value < x - kMergeTol * (1.0 + std::abs(x))) {
      below += a.prob;
    } else if (std::abs(a.value - x) <= kMergeTol * (1.0 + std::abs(x))) {
      at = a.prob;
      break;
    } else {
      break;
    }
  }
  if (at < 0.0) throw std::domain_error("randomized_pit: x is not an atom");
  double v = below + u * at;
  bool did_clamp = false;
  if (v <= 1e-15) {
    v = 1e-15;
    did_clamp = true;
  } else if (v >= 1.0 - 1e-15) {
    v = 1.0 - 1e-15;
    did_clamp = true;
  }
  if (clamped) *clamped = did_clamp;
  return target_sigma * normal_quantile(v);
}

double wasserstein_discrete_gaussian(const FiniteDistribution& dist, double sd,
                                     double p, double rel_tol) {
  dist.validate();
  if (p < 1.0) throw std::domain_error("wasserstein_discrete_gaussian: p < 1");
  if (sd == 0.0) {
    double acc = 0.0;
    for (const auto& a : dist.atoms) acc += a.prob * std::pow(std::abs(a.value), p);
    return std::pow(acc, 1.0 / p);
  }
  QuadratureConfig cfg;
  cfg.rel_tol = rel_tol;
  cfg.abs_tol = 1e-15;
  // Integrate |v_j - z|^p phi(z/sd)/sd over the z-interval matching each atom
  // of the quantile function; tails truncated where the Gaussian mass is
  // below 1e-17.
  const double z_cap = sd * 8.5;
  double cum = 0.0;
  double acc = 0.0;
  for (const auto& a : dist.atoms) {
    const double c_lo = std::clamp(cum, 0.0, 1.0);
    cum += a.prob;
    const double c_hi = std::min(cum, 1.0);
    const double z_lo =
        (c_lo <= 0.0) ? -z_cap : std::max(-z_cap, sd * normal_quantile(c_lo));
    const double z_hi =
        (c_hi >= 1.0) ? z_cap : std::min(z_cap, sd * normal_quantile(c_hi));
    if (z_hi <= z_lo) continue;
    const double v = a.value;
    const auto integrand = [v, sd, p](double z) {
      return std::pow(std::abs(v - z), p) * normal_pdf(z / sd) / sd;
    };
    // |v - z|^p has a kink at z = v; split there so every panel is smooth.
    if (v > z_lo && v < z_hi) {
      acc += integrate_adaptive(integrand, z_lo, v, false, cfg).value;
      acc += integrate_adaptive(integrand, v, z_hi, false, cfg).value;
    } else {
      acc += integrate_adaptive(integrand, z_lo, z_hi, false, cfg).value;
    }
  }
  return std::pow(acc, 1.0 / p);
}

double brute_force_conditional_wp(const std::vector<double>& multiset, std::size_t k,
                                  double p, std::optional<double> sigma,
                                  double rel_tol) {
  const std::size_t n = multiset.size();
  if (n > 12) throw std::domain_error("brute_force_conditional_wp: n > 12");
  if (k < 1 || k >= n) throw std::domain_error("brute_force_conditional_wp: bad k");
  double total = 0.0;
  for (double v : multiset) total += v;

  // The conditional law of W_k given the multiset is uniform over all
  // C(n,k) index subsets.
  std::vector<double> w_values;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  bool more = true;
  while (more) {
    double s = 0.0;
    for (std::size_t i : idx) s += multiset[i];
    w_values.push_back(s - double(k) / double(n) * total);
    more = false;
    for (std::size_t i = k; i-- > 0;) {
      if (idx[i] != i + n - k) {
        ++idx[i];
        for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
        more = true;
        break;
      }
    }
  }
  FiniteDistribution law = FiniteDistribution::from_multiset(w_values);

  double sig;
  if (sigma.has_value()) {
    sig = *sigma;
  } else {
    const double mean = total / double(n);
    double var = 0.0;
    for (double v : multiset) var += (v - mean) * (v - mean);
    sig = std::sqrt(var / double(n));
  }
  const double sd = sig * std::sqrt(double(k) * double(n - k) / double(n));
  return wasserstein_discrete_gaussian(law, sd, p, rel_tol);
}

double conditional_wp_norm_bruteforce(const FiniteDistribution& dist, std::size_t n,
                                      std::size_t k, double p) {
  dist.validate();
  if (n > 10) throw std::domain_error("conditional_wp_norm_bruteforce: n > 10");
  const double mu = dist.mean();
  const double sig = std::sqrt(dist.variance());
  const std::size_t m = dist.atoms.size();

  // Enumerate count vectors (c_1..c_m) summing to n, weighted multinomially.
  std::vector<std::size_t> counts(m, 0);
  double acc = 0.0;
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos,
                                                          std::size_t left) {
    if (pos + 1 == m) {
      counts[pos] = left;
      double log_w = log_factorial(n);
      std::vector<double> multiset;
      for (std::size_t i = 0; i < m; ++i) {
        log_w -= log_factorial(counts[i]);
        log_w += double(counts[i]) * std::log(std::max(dist.atoms[i].prob, 1e-300));
        for (std::size_t c = 0; c < counts[i]; ++c)
          multiset.push_back(dist.atoms[i].value - mu);
      }
      const double w = std::exp(log_w);
      if (w > 1e-300) {
        const double d = brute_force_conditional_wp(multiset, k, p, sig);
        acc += w * std::pow(d, p);
      }
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[pos] = c;
      rec(pos + 1, left - c);
    }
  };
  rec(0, n);
  return std::pow(acc, 1.0 / p);
}

double brute_force_marginal_wp(const FiniteDistribution& dist, std::size_t n, double p,
                               double rel_tol) {
  dist.validate();
  const double mu = dist.mean();
  const double sig = std::sqrt(dist.variance());
  // Convolve the centered law n times, merging equal values on a fine grid.
  std::map<std::int64_t, double> law;
  const double quantum = 1e-9;
  auto key_of = [&](double v) { return std::int64_t(std::llround(v / quantum)); };
  law[key_of(0.0)] = 1.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::map<std::int64_t, double> next;
    for (const auto& [kv, pr] : law) {
      const double base = double(kv) * quantum;
      for (const auto& a : dist.atoms) next[key_of(base + a.value - mu)] += pr * a.prob;
    }
    if (next.size() > 1000000)
      throw std::domain_error("brute_force_marginal_wp: state space too large");
    law.swap(next);
  }
  std::vector<double> values, probs;
  for (const auto& [kv, pr] : law) {
    values.push_back(double(kv) * quantum);
    probs.push_back(pr);
  }
  FiniteDistribution sn = FiniteDistribution::from_weights(values, probs);
  return wasserstein_discrete_gaussian(sn, sig * std::sqrt(double(n)), p, rel_tol);
}

double binary_conditional_wp_norm(std::size_t n, std::size_t k, double success_prob,
                                  double R, double p, double rel_tol) {
  if (k < 1 || k >= n) throw std::domain_error("binary_conditional_wp_norm: bad k");
  if (!(success_prob > 0.0 && success_prob < 1.0))
    throw std::domain_error("binary_conditional_wp_norm: success_prob in (0,1)");
  const double q = success_prob;
  const double sigma = R * std::sqrt(q * (1.0 - q));
  const double sd = sigma * std::sqrt(double(k) * double(n - k) / double(n));
  double acc = 0.0;
  for (std::size_t c = 0; c <= n; ++c) {
    const double w = binomial_pmf(n, q, c);
    if (w <= 0.0) continue;
    const std::size_t h_lo = (c > n - k) ? c - (n - k) : 0;
    const std::size_t h_hi = std::min(c, k);
    std::vector<double> values, probs;
    double total = 0.0;
    for (std::size_t h = h_lo; h <= h_hi; ++h) {
      values.push_back(R * (double(h) - double(k) * double(c) / double(n)));
      probs.push_back(hypergeometric_pmf(n, c, k, h));
      total += probs.back();
    }
    for (double& pr : probs) pr /= total;
    const FiniteDistribution law = FiniteDistribution::from_weights(values, probs);
    const double d = wasserstein_discrete_gaussian(law, sd, p, rel_tol);
    acc += w * std::pow(d, p);
  }
  return std::pow(acc, 1.0 / p);
}

double hypergeometric_pmf(std::size_t population, std::size_t successes,
                          std::size_t draws, std::size_t h) {
  if (h > successes || h > draws) return 0.0;
  if (draws - h > population - successes) return 0.0;
  const double lg = log_binomial_coefficient(successes, h) +
                    log_binomial_coefficient(population - successes, draws - h) -
                    log_binomial_coefficient(population, draws);
  return std::exp(lg);
}

double binomial_pmf(std::size_t n, double q, std::size_t j) {
  if (j > n) return 0.0;
  if (q <= 0.0) return j == 0 ? 1.0 : 0.0;
  if (q >= 1.0) return j == n ? 1.0 : 0.0;
  return std::exp(log_binomial_coefficient(n, j) + double(j) * std::log(q) +
                  double(n - j) * std::log1p(-q));
}

namespace {

double clamp_unit(double v) {
  if (v <= 1e-15) return 1e-15;
  if (v >= 1.0 - 1e-15) return 1.0 - 1e-15;
  return v;
}

struct DyadicContext {
  const std::vector<int>* success;  // 1 when Y_i == R
  double sigma;
  std::mt19937_64* rng;
  std::vector<double>* uniforms;
};

// Bridge coupling of one dyadic block: returns Ztilde at relative indices
// 1..len (last entry 0). The midpoint given the block's success count is a
// shifted hypergeometric, randomized-PIT'd onto the Gaussian target.
std::vector<double> couple_block(const DyadicContext& ctx, std::size_t start,
                                 std::size_t len) {
  if (len == 1) return {0.0};
  const std::size_t half = len / 2;
  std::size_t c = 0, h = 0;
  for (std::size_t i = 0; i < len; ++i) {
    if ((*ctx.success)[start + i]) {
      ++c;
      if (i < half) ++h;
    }
  }
  double below = 0.0;
  const std::size_t h_lo = (c > half) ? c - half : 0;
  for (std::size_t x = h_lo; x < h; ++x) below += hypergeometric_pmf(len, c, half, x);
  const double at = hypergeometric_pmf(len, c, half, h);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(*ctx.rng);
  ctx.uniforms->push_back(u);
  const double v = clamp_unit(below + u * at);
  const double z_mid = std::sqrt(double(len)) * ctx.sigma / 2.0 * normal_quantile(v);

  const std::vector<double> left = couple_block(ctx, start, half);
  const std::vector<double> right = couple_block(ctx, start + half, half);
  std::vector<double> out(len, 0.0);
  for (std::size_t k = 1; k < half; ++k)
    out[k - 1] = left[k - 1] + 2.0 * double(k) / double(len) * z_mid;
  out[half - 1] = z_mid;
  for (std::size_t k = half + 1; k < len; ++k)
    out[k - 1] = right[k - half - 1] + 2.0 * double(len - k) / double(len) * z_mid;
  out[len - 1] = 0.0;
  return out;
}

}  // namespace

CouplingTrace binary_dyadic_coupling(std::size_t n, double success_prob, double R,
                                     std::uint64_t seed) {
  if (n < 2 || (n & (n - 1)) != 0)
    throw std::domain_error("binary_dyadic_coupling: n must be a power of two >= 2");
  if (!(success_prob > 0.0 && success_prob < 1.0))
    throw std::domain_error("binary_dyadic_coupling: success_prob in (0,1)");
  CouplingTrace trace;
  trace.n = n;
  trace.seed = seed;
  std::mt19937_64 rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<int> success(n, 0);
  trace.Y.resize(n);
  const double q = success_prob;
  const double sigma = R * std::sqrt(q * (1.0 - q));
  for (std::size_t i = 0; i < n; ++i) {
    success[i] = unif(rng) < q ? 1 : 0;
    trace.Y[i] = success[i] ? R : 0.0;
  }
  trace.S.resize(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += trace.Y[i] - q * R;
    trace.S[i] = s;
  }
  trace.W.resize(n);
  for (std::size_t k = 1; k <= n; ++k)
    trace.W[k - 1] = trace.S[k - 1] - double(k) / double(n) * trace.S[n - 1];

  DyadicContext ctx{&success, sigma, &rng, &trace.uniforms};
  trace.Ztilde = couple_block(ctx, 0, n);

  // Top level: couple S_n to N(0, n sigma^2) through the exact binomial law.
  std::size_t total_successes = 0;
  for (int v : success) total_successes += std::size_t(v);
  double below = 0.0;
  for (std::size_t j = 0; j < total_successes; ++j) below += binomial_pmf(n, q, j);
  const double at = binomial_pmf(n, q, total_successes);
  const double u_top = unif(rng);
  trace.uniforms.push_back(u_top);
  const double v_top = clamp_unit(below + u_top * at);
  const double z_n = std::sqrt(double(n)) * sigma * normal_quantile(v_top);

  trace.Z.resize(n);
  for (std::size_t k = 1; k <= n; ++k)
    trace.Z[k - 1] = trace.Ztilde[k - 1] + double(k) / double(n) * z_n;
  return trace;
}

}  // namespace kmt
