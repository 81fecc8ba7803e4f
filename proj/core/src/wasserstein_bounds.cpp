#include "kmt/wasserstein_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kmt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kStirling = std::exp(19.0 / 300.0) * std::pow(kPi, 0.25);

double rosenthal_Ap(int p) {
  return std::pow(2.0, 1.0 / p) * std::sqrt(p / 2.0 + 1.0) * std::exp(0.5 + 1.0 / p);
}

double rosenthal_Astar(std::size_t n, int p) {
  return (p / 2.0 + 1.0) * std::pow(double(n), 1.0 / p - 0.5);
}

double martingale_Cp(int p) {
  return 2.0 * std::sqrt(2.0) * std::pow(p / 4.0 + 1.0, 1.0 / p) *
         (1.0 + double(p) / std::log(p / 2.0));
}

// sqrt(2) * (Gamma((p+1)/2)/sqrt(pi))^(1/p); equals ||Z||_p.
double symmetric_mz_const(int p) { return gaussian_abs_pnorm(p); }

QuadratureConfig inner_quadrature() {
  QuadratureConfig cfg;
  cfg.rel_tol = 1e-8;
  cfg.abs_tol = 1e-13;
  cfg.max_subdivisions = 4096;
  return cfg;
}

// Non-throwing adaptive integral; +inf when the integrand blows up.
double quad(const std::function<double(double)>& f, double a, double b,
            bool singular_lower) {
  if (!(b > a)) return 0.0;
  IntegrationResult r = integrate_adaptive(f, a, b, singular_lower, inner_quadrature());
  return r.value;
}

struct GoldenResult {
  double x;
  double value;
};

// Golden-section minimization of a unimodal-ish slice; deterministic.
GoldenResult golden_minimize(const std::function<double(double)>& f, double lo,
                             double hi, int iterations) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iterations; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return (f1 <= f2) ? GoldenResult{x1, f1} : GoldenResult{x2, f2};
}

}  // namespace

// (S', K)-independent constants of the marginal bound; the binomial norms are
// O(n) sums, so they are hoisted out of the grid sweep.
struct TildeConstants {
  double gp = 0.0;
  double D = 0.0;
  double Cnp = 0.0;
  double Bpn = 0.0;
};

int default_p_max(double alpha_floor) {
  alpha_floor = std::clamp(alpha_floor, 1e-300, 0.5);
  return int(std::ceil(6.0 + 3.0 * std::log(1.0 / alpha_floor)));
}

double sigma_nk(std::size_t n, std::size_t k, const BoundedModel& model) {
  if (k < 1 || k >= n) throw std::domain_error("sigma_nk: k must lie in [1, n-1]");
  return model.sigma * std::sqrt(double(k) * double(n - k) / double(n));
}

double c_odd(std::size_t n, std::size_t k, int p, const BoundedModel& model) {
  if (k < 1 || k >= n) throw std::domain_error("c_odd: k must lie in [1, n-1]");
  if (p < 2) throw std::domain_error("c_odd: p < 2");
  const double R = model.R, sig = model.sigma;
  const double dn = double(n), dk = double(k), dnk = double(n - k);
  const double mom = R * R + 3.0 * sig * sig;
  const double Ap = rosenthal_Ap(p);
  const double Astar_k = rosenthal_Astar(k, p);

  const double inner_min =
      std::min(std::pow(std::pow(2.0, 1.0 / p) * std::pow(R, 2.0 / p) *
                            std::pow(mom, 1.0 / p),
                        2.0),
               std::pow(std::pow(mom, 1.0 / p) +
                            std::pow(R, 4.0 / p) / (std::sqrt(dk) * std::pow(sig, 2.0 / p)) *
                                std::min(std::sqrt(p - 1.0), Ap + Astar_k),
                        2.0));
  const double co1 = (1.0 / dn) * std::sqrt(p - 1.0) * std::sqrt(dk * dnk) *
                     std::pow(R, -4.0 / p) * std::pow(sig, 2.0 / p) *
                     std::sqrt(dnk * std::pow(mom, 2.0 / p) + dk * inner_min);
  if (p < 4) return co1;

  const double Cp = martingale_Cp(p);
  const double term1 = std::pow(R, -2.0) * std::sqrt(dnk * dk) *
                       std::sqrt(dnk * sig * sig * mom +
                                 dk * (R * R * sig * sig + std::pow(R, 4.0 - 4.0 / p)));
  // k^(p-1) (...)^p + (n-k)^(p-1) sigma^2 mom, reduced in log space.
  const double base_k = std::pow(sig, 2.0 / p) * std::pow(mom, 1.0 / p) +
                        std::pow(2.0, 1.0 / p) * std::pow(R, 2.0 / p) / std::sqrt(dk);
  const double log_a = (p - 1.0) * std::log(dk) + double(p) * std::log(base_k);
  const double log_b = (p - 1.0) * std::log(dnk) + std::log(sig * sig * mom);
  const double term2 = std::pow(dk, 1.0 / p) * std::pow(dnk, 1.0 / p) *
                       std::pow(R, -4.0 / p) * std::exp(log_add_exp(log_a, log_b) / p);
  const double co2 = (Cp / dn) * (term1 + term2);
  return std::min(co1, co2);
}

double c_even(std::size_t n, std::size_t k, int p, const BoundedModel& model) {
  if (k < 1 || k >= n) throw std::domain_error("c_even: k must lie in [1, n-1]");
  if (p < 2) throw std::domain_error("c_even: p < 2");
  const double R = model.R, sig = model.sigma;
  const double dn = double(n), dk = double(k), dnk = double(n - k);
  const double mom = R * R + 3.0 * sig * sig;

  const double min_branch =
      std::min(std::pow(0.25, 1.0 / p) * std::pow(R, 2.0 / p),
               std::pow(2.0, 1.0 / p) * std::pow(sig, 2.0 / p) +
                   std::pow(R, -2.0 / p) * std::pow(sig, 2.0 / p) * std::pow(mom, 1.0 / p));
  const double ce1 =
      (1.0 / dn) * std::sqrt(dk * dnk) * std::pow(R, -2.0) *
      (std::sqrt(p - 1.0) * std::pow(R, 2.0 - 4.0 / p) *
           std::sqrt(dnk * std::pow(sig, 4.0 / p) * std::pow(mom, 2.0 / p) +
                     dk * std::pow(R, 2.0 / p) * min_branch * min_branch) +
       2.0 * std::sqrt(dk * dnk) * sig * sig);

  // Binomial-norm branch; derived for k <= n-k, symmetric in the two groups.
  const double kk = double(std::min(k, n - k));
  const double nkk = double(std::max(k, n - k));
  const double ce3 = (1.0 / dn) *
                     (kk * binomial_pnorm(std::size_t(kk), 2.0 * sig * sig / (R * R), p) +
                      nkk * kk * std::pow(2.0, 1.0 / p) * std::pow(R, -2.0 / p) *
                          std::pow(sig, 2.0 / p));
  if (p < 4) return std::min(ce1, ce3);

  const double Cp = martingale_Cp(p);
  const double term1 =
      std::pow(R, -2.0) * std::sqrt(dnk * dk) *
      std::sqrt(2.0 * dnk * std::pow(sig, 4.0 / p) * std::pow(mom, 2.0 / p) +
                dnk * R * R +
                dk * (sig * sig + std::pow(sig, 4.0 / p) * std::pow(R, 2.0 - 4.0 / p)));
  const double log_a = (p - 1.0) * std::log(dnk) + std::log(sig * sig * mom);
  const double log_min =
      std::min(std::log(std::pow(R, 4.0) / 4.0),
               std::log(R * R * sig * sig) +
                   double(p) * std::log(std::pow(2.0, 1.0 / p) + std::pow(mom, 1.0 / p)));
  const double log_b = (p - 1.0) * std::log(dk) + log_min;
  const double term2 = std::pow(dk, 1.0 / p) * std::pow(dnk, 1.0 / p) *
                       std::pow(R, -4.0 / p) * std::exp(log_add_exp(log_a, log_b) / p);
  const double ce2 =
      (Cp / dn) * (term1 + term2) + (2.0 / dn) * dk * dnk * std::pow(R, -2.0) * sig * sig;
  return std::min(ce1, std::min(ce2, ce3));
}

double WassersteinEvaluator::hermite_norm(unsigned l, int p) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = hermite_cache_.find({l, p});
    if (it != hermite_cache_.end()) return it->second;
  }
  const double v = hermite_pnorm(l, double(p), cfg_.hermite_mode);
  std::lock_guard<std::mutex> lock(mutex_);
  hermite_cache_[{l, p}] = v;
  return v;
}

// --- Marginal bound (omega_tilde) --------------------------------------------

namespace {

struct TildeIntegrals {
  std::vector<double> J1, J2;  // indexed by j, 1..jmax
  double Jexp1 = 0.0, Jexp2 = 0.0;
  bool finite = true;
};

// The y-integrals of the marginal bound in w = log-space coordinates:
//   J1(j)  = n^(1/2-j)   int_0^W e^(-w/2) (e^w-1)^j dw
//   J2(j)  = n^(1-j)     int_0^W e^(-w/2) (e^w-1)^(j-1/2) dw
//   Jexp1  = sqrt(n)     int_0^W e^(-w/2) [exp(expo (e^w-1)/n) - 1] dw
//   Jexp2  = n           int_0^W e^(-w/2) (e^w-1)^(-1/2) [exp(...) - 1] dw
// with W = log(1/S'); panel counts no longer depend on n or S'.
TildeIntegrals tilde_integrals(std::size_t n, double Sprime, int jmax, double expo) {
  TildeIntegrals ints;
  ints.J1.assign(std::size_t(std::max(jmax, 0)) + 1, 0.0);
  ints.J2.assign(std::size_t(std::max(jmax, 0)) + 1, 0.0);
  if (Sprime >= 1.0) return ints;
  const double dn = double(n);
  const double W = std::log(1.0 / Sprime);
  const double rate = expo / dn;
  for (int j = 1; j <= jmax; ++j) {
    ints.J1[std::size_t(j)] =
        std::pow(dn, 0.5 - j) * quad(
                                    [j](double w) {
                                      return std::exp(-0.5 * w) *
                                             std::pow(std::expm1(w), double(j));
                                    },
                                    0.0, W, false);
    ints.J2[std::size_t(j)] =
        std::pow(dn, 1.0 - j) * quad(
                                    [j](double w) {
                                      return std::exp(-0.5 * w) *
                                             std::pow(std::expm1(w), j - 0.5);
                                    },
                                    0.0, W, true);
  }
  ints.Jexp1 = std::sqrt(dn) * quad(
                                   [rate](double w) {
                                     return std::exp(-0.5 * w) *
                                            std::expm1(rate * std::expm1(w));
                                   },
                                   0.0, W, false);
  ints.Jexp2 = dn * quad(
                        [rate](double w) {
                          const double d = std::expm1(w);
                          if (d <= 0.0) return 0.0;
                          return std::exp(-0.5 * w) * std::pow(d, -0.5) *
                                 std::expm1(rate * d);
                        },
                        0.0, W, true);
  ints.finite = std::isfinite(ints.Jexp1) && std::isfinite(ints.Jexp2);
  for (int j = 1; j <= jmax && ints.finite; ++j)
    ints.finite = std::isfinite(ints.J1[std::size_t(j)]) &&
                  std::isfinite(ints.J2[std::size_t(j)]);
  return ints;
}

}  // namespace

double WassersteinEvaluator::omega_tilde_at(std::size_t n, int p, double Sprime, int K,
                                            const std::vector<double>& norms) const {
  const double expo = 0.5 * (p - 1.0) * model_.tildeR * model_.tildeR;
  const TildeIntegrals ints = tilde_integrals(n, Sprime, K - 1, expo);
  const TildeConstants consts = omega_tilde_constants(n, p);
  return omega_tilde_assemble(n, p, Sprime, K, norms, consts, ints.J1, ints.J2,
                              ints.Jexp1, ints.Jexp2, ints.finite);
}

TildeConstants WassersteinEvaluator::omega_tilde_constants(std::size_t n, int p) const {
  const double tR = model_.tildeR;
  const double tRs = model_.tildeR_s;
  const double dn = double(n);
  TildeConstants c;
  c.gp = gaussian_abs_pnorm(p);
  const double Ap = rosenthal_Ap(p);
  const double Astar_n = rosenthal_Astar(n, p);
  const double mz = symmetric_mz_const(p);

  // D_{n,p}: four min-branches; the ambiguous bracket of branch two is taken
  // as the max of both printed readings.
  const double x = std::max(0.0, tRs * tRs - 1.0);
  {
    const double pw = x > 0.0 ? std::pow(x, 1.0 - 1.0 / p) : 0.0;
    double bracket = 0.0;
    if (x > 0.0) {
      const double read_plus =
          std::pow((std::pow(x, double(p)) + x) / (tRs * tRs), 1.0 / p);
      const double lit = (std::pow(x, double(p)) * tRs * tRs - 1.0) / (tRs * tRs);
      const double read_lit = lit > 0.0 ? std::pow(lit, 1.0 / p) : 0.0;
      bracket = std::max(read_plus, read_lit);
    }
    const double b1 = std::sqrt(p - 1.0) * std::max(pw, bracket);
    const double b2 = std::max(pw, bracket) * Astar_n + std::sqrt(x) * Ap;
    const double b3 = mz * std::pow(tRs, 2.0 * (1.0 - 2.0 / p)) *
                      (x > 0.0 ? std::pow(x, 1.0 / p) : 0.0);
    double d = std::min(b1, std::min(b2, b3));
    if (p >= 4 && x > 0.0) {
      const double q4 = 2.0 * x / std::pow(tRs, 4.0);
      const double b4 = mz * std::pow(2.0, -1.0 / p) * (tR * tR / std::sqrt(dn)) *
                        std::sqrt(binomial_pnorm(n, q4, p / 2.0));
      d = std::min(d, b4);
    }
    c.D = d / (2.0 * std::sqrt(dn));
  }

  const double qR = 2.0 / (tR * tR);
  c.Cnp = mz * std::pow(2.0, 1.0 / p) * std::pow(tR, 1.0 - 2.0 / p);
  if (p >= 4) {
    c.Cnp = std::min(c.Cnp, mz * (tR / std::sqrt(dn)) *
                                std::sqrt(binomial_pnorm(n, qR, p / 2.0)));
  }
  c.Bpn = (tR * tR / dn) * binomial_pnorm(n, qR, double(p));
  return c;
}

double WassersteinEvaluator::omega_tilde_assemble(
    std::size_t n, int p, double Sprime, int K, const std::vector<double>& norms,
    const TildeConstants& consts, const std::vector<double>& J1,
    const std::vector<double>& J2, double Jexp1, double Jexp2, bool finite) const {
  if (!finite) return kInf;
  const double tR = model_.tildeR;
  const double dn = double(n);
  const double Msq = 1.0 - Sprime;
  if (Msq < 0.0) return kInf;
  const double M = std::sqrt(Msq);
  if (p != 2 && M == 0.0) return kInf;
  const double gp = consts.gp;
  const double D = consts.D;
  const double Cnp = consts.Cnp;
  const double Bpn = consts.Bpn;

  double Bsum = 0.0, Csum = 0.0;
  for (int j = 1; j <= K - 1; ++j) {
    const double hodd = norms[std::size_t(2 * j + 1)];
    const double heven = norms[std::size_t(2 * j)];
    const double diffB =
        hodd / std::tgamma(2.0 * j + 3.0) -
        std::pow(2.0, -j) * kStirling * std::pow(double(K), 0.25) *
            std::pow(p - 1.0, j + 0.5) /
            (2.0 * (K + 1.0) * std::sqrt(2.0 * K + 1.0) * std::tgamma(j + 1.0));
    const double diffC = heven / std::tgamma(2.0 * j + 2.0) -
                         std::pow(double(K), 0.25) * std::pow(2.0, -j) *
                             std::pow(p - 1.0, double(j)) * kStirling /
                             ((2.0 * K + 1.0) * std::tgamma(j + 1.0));
    Bsum += std::pow(tR, 2.0 * j) / std::sqrt(dn) * std::max(0.0, diffB) *
            J1[std::size_t(j)];
    Csum += std::pow(tR, 2.0 * j) / dn * std::max(0.0, diffC) * J2[std::size_t(j)];
  }
  const double Bexp = 0.25 * kStirling * std::pow(double(K), 0.25) * std::sqrt(p - 1.0) /
                      ((K + 1.0) * std::sqrt(2.0 * K + 1.0)) / std::sqrt(dn) * Jexp1;
  const double Cexp =
      kStirling * std::pow(double(K), 0.25) / ((2.0 * K + 1.0) * dn) * Jexp2;

  const double brace = gp * (kPi / 2.0 - std::asin(M)) + gp * D * Msq +
                       0.5 * Bpn * (Bsum + Bexp) + 0.5 * Cnp * (Csum + Cexp);
  const double divisor = (p == 2) ? 1.0 : M;
  return std::sqrt(dn) / divisor * brace;
}

double WassersteinEvaluator::omega_tilde(std::size_t n, int p) const {
  if (n < 1) throw std::domain_error("omega_tilde: n < 1");
  if (p < 2) throw std::domain_error("omega_tilde: p < 2");
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = tilde_cache_.find({n, p});
    if (it != tilde_cache_.end()) return it->second;
  }
  const int Kmax = *std::max_element(cfg_.K_grid.begin(), cfg_.K_grid.end());
  std::vector<double> norms(std::size_t(2 * Kmax) + 2, 0.0);
  for (unsigned l = 0; l < norms.size(); ++l) norms[l] = hermite_norm(l, p);

  const double expo = 0.5 * (p - 1.0) * model_.tildeR * model_.tildeR;
  const int jmax = Kmax - 1;
  const TildeConstants consts = omega_tilde_constants(n, p);

  double best = kInf;
  double best_logS = 0.0;
  int best_K = cfg_.K_grid.front();
  for (std::size_t idx = 0; idx < cfg_.kappa_grid_size; ++idx) {
    const double Sprime = std::pow(2.0, -double(idx));
    const TildeIntegrals ints = tilde_integrals(n, Sprime, jmax, expo);
    for (int K : cfg_.K_grid) {
      const double v = omega_tilde_assemble(n, p, Sprime, K, norms, consts, ints.J1,
                                            ints.J2, ints.Jexp1, ints.Jexp2,
                                            ints.finite);
      if (std::isfinite(v) && v < best) {
        best = v;
        best_logS = -double(idx) * std::log(2.0);
        best_K = K;
      }
    }
  }
  if (std::isfinite(best)) {
    const double span = std::log(2.0);
    GoldenResult g = golden_minimize(
        [&](double logS) {
          const double Sp = std::exp(logS);
          const TildeIntegrals ints = tilde_integrals(n, Sp, best_K - 1, expo);
          const double v =
              omega_tilde_assemble(n, p, Sp, best_K, norms, consts, ints.J1, ints.J2,
                                   ints.Jexp1, ints.Jexp2, ints.finite);
          return std::isfinite(v) ? v : kInf;
        },
        best_logS - span, std::min(0.0, best_logS + span), 40);
    best = std::min(best, g.value);
  }
  const double result = model_.sigma * best;
  std::lock_guard<std::mutex> lock(mutex_);
  tilde_cache_[{n, p}] = result;
  return result;
}

double WassersteinEvaluator::marginal_bound(std::size_t n, int p) const {
  const double trivial =
      std::sqrt(p - 1.0) * std::sqrt(double(n)) * (model_.R + model_.sigma);
  return std::min(trivial, omega_tilde(n, p));
}

double WassersteinEvaluator::s_cond(std::size_t n, std::size_t k, int p) const {
  if (k < 1 || k >= n) throw std::domain_error("s_cond: k must lie in [1, n-1]");
  const double trivial =
      std::sqrt(p - 1.0) * std::sqrt(double(n)) * (model_.R + model_.sigma);
  if (2 * k == n) return std::min(trivial, 0.5 * omega_tilde(n, p));
  return std::min(trivial, std::max(omega_tilde(k, p), omega_tilde(n - k, p)));
}

// --- Conditional bound (omega) -----------------------------------------------

namespace {

struct OmegaParts {
  // Everything that does not depend on (S, K).
  double snk;
  double trivial;
  double Scond;
  double gp;
  double a2_factor;  // multiplies (1 - sqrt(S))
  double codd, ceven;
  double s2ratio;    // R^2 / sigma_nk^2 = S_tilde * a
  double Stilde;     // R^2 n / (k sigma^2)
  double expo;       // (p-1) * Stilde * a / 2, exponent rate in u-space
};

}  // namespace

ConditionalBoundResult WassersteinEvaluator::omega_conditional(std::size_t n,
                                                               std::size_t k,
                                                               int p) const {
  if (k < 1 || k >= n) throw std::domain_error("omega_conditional: k in [1, n-1]");
  if (p < 2) throw std::domain_error("omega_conditional: p < 2");
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cond_cache_.find({n, k, p});
    if (it != cond_cache_.end()) return it->second;
  }

  const double R = model_.R, sig = model_.sigma;
  const double dn = double(n), dk = double(k), dnk = double(n - k);
  OmegaParts parts;
  parts.snk = sigma_nk(n, k, model_);
  parts.trivial = std::sqrt(p - 1.0) * parts.snk * (1.0 + std::sqrt(2.0) * R / sig);
  parts.Scond = s_cond(n, k, p);
  parts.gp = gaussian_abs_pnorm(p);
  const double tRs = model_.tildeR_s;
  const double x = std::max(0.0, tRs * tRs - 1.0);
  const double Ap = rosenthal_Ap(p);
  {
    const double half_min =
        std::min(std::sqrt(p - 1.0) * std::pow(x, 1.0 - 1.0 / p),
                 Ap * std::sqrt(x) + rosenthal_Astar(n, p) * std::pow(x, 1.0 - 1.0 / p));
    const double sq = std::min(std::sqrt(p - 1.0) * std::pow(tRs, 1.0 - 2.0 / p),
                               Ap + std::pow(tRs, 1.0 - 2.0 / p) * rosenthal_Astar(k, p));
    parts.a2_factor = parts.gp * std::sqrt(dn) / std::sqrt(dk * dnk) *
                      (0.5 * half_min + sq * sq / std::sqrt(dn));
  }
  parts.codd = c_odd(n, k, p, model_);
  parts.ceven = c_even(n, k, p, model_);
  parts.Stilde = R * R * dn / (dk * sig * sig);
  parts.s2ratio = R * R / (parts.snk * parts.snk);
  parts.expo = 0.5 * (p - 1.0) * parts.Stilde / dnk;

  const int Kmax = *std::max_element(cfg_.K_grid.begin(), cfg_.K_grid.end());
  std::vector<double> h_even(Kmax + 1, 0.0), h_odd(Kmax + 1, 0.0);
  for (int m = 1; m <= Kmax; ++m) {
    h_even[m] = hermite_norm(unsigned(2 * m), p);      // ||H_{2m}||_p
    h_odd[m] = hermite_norm(unsigned(2 * m + 1), p);   // ||H_{2m+1}||_p
  }

  // u-space integrals over (1, 1/S): the y-space family y^{-3/2}(y-a)^q
  // rescaled by y = a u. These are K-independent, so compute once per S.
  struct IntegralPack {
    std::vector<double> I1, I2;
    double IexpO = 0.0, IexpE = 0.0;
    bool finite = true;
  };
  // Integrate in w = log u so the panel count stays independent of 1/S:
  // int_1^{1/S} u^{-3/2} (u-1)^q h(u) du = int_0^{log(1/S)} e^{-w/2}
  // (e^w - 1)^q h(e^w) dw.
  auto compute_integrals = [&](double S) -> IntegralPack {
    IntegralPack pack;
    pack.I1.assign(std::size_t(Kmax) + 1, 0.0);
    pack.I2.assign(std::size_t(Kmax) + 1, 0.0);
    if (S >= 1.0) return pack;
    const double W = std::log(1.0 / S);
    for (int m = 1; m <= Kmax; ++m) {
      pack.I1[std::size_t(m)] = quad(
          [m](double w) {
            return std::exp(-0.5 * w) * std::pow(std::expm1(w), m - 0.5);
          },
          0.0, W, true);
      pack.I2[std::size_t(m)] = quad(
          [m](double w) {
            return std::exp(-0.5 * w) * std::pow(std::expm1(w), double(m));
          },
          0.0, W, false);
    }
    const double rate = parts.expo;
    pack.IexpO = quad(
        [rate](double w) {
          const double d = std::expm1(w);
          if (d <= 0.0) return 0.0;
          return std::exp(-0.5 * w) * std::pow(d, -0.5) * std::expm1(rate * d);
        },
        0.0, W, true);
    pack.IexpE = quad(
        [rate](double w) {
          return std::exp(-0.5 * w) * std::expm1(rate * std::expm1(w));
        },
        0.0, W, false);
    pack.finite = std::isfinite(pack.IexpO) && std::isfinite(pack.IexpE);
    for (int m = 1; m <= Kmax && pack.finite; ++m)
      pack.finite = std::isfinite(pack.I1[std::size_t(m)]) &&
                    std::isfinite(pack.I2[std::size_t(m)]);
    return pack;
  };
  auto assemble = [&](double S, int K, const IntegralPack& pack) -> double {
    if (!pack.finite) return kInf;
    const double M = std::sqrt(std::max(0.0, 1.0 - S));
    double odd_sum = 0.0, even_sum = 0.0;
    double ratio_pow = 1.0;
    for (int m = 1; m <= K; ++m) {
      ratio_pow *= parts.s2ratio;
      const double fact_m = std::tgamma(m + 1.0);
      const double diff_odd =
          h_even[m] * fact_m / std::tgamma(2.0 * m + 2.0) -
          kStirling * std::pow(K + 1.0, 0.25) * std::pow(p - 1.0, double(m)) /
              (std::pow(2.0, double(m)) * (2.0 * K + 3.0));
      const double diff_even =
          h_odd[m] * fact_m / std::tgamma(2.0 * m + 3.0) -
          kStirling * std::pow(K + 1.0, 0.25) * std::pow(p - 1.0, m + 0.5) /
              (std::pow(2.0, double(m)) * (2.0 * K + 4.0) * std::sqrt(2.0 * K + 3.0));
      odd_sum += ratio_pow / fact_m * std::max(0.0, diff_odd) * pack.I1[std::size_t(m)];
      even_sum += ratio_pow / fact_m * std::max(0.0, diff_even) * pack.I2[std::size_t(m)];
    }
    const double odd_exp_coef =
        kStirling * std::pow(K + 1.0, 0.25) / (2.0 * (2.0 * K + 3.0));
    const double even_exp_coef = kStirling * std::pow(K + 1.0, 0.25) *
                                 std::sqrt(p - 1.0) /
                                 ((2.0 * K + 4.0) * std::sqrt(2.0 * K + 3.0));
    const double odd_total =
        (R / parts.snk) * (0.5 * odd_sum + odd_exp_coef * pack.IexpO);
    const double even_total =
        (parts.s2ratio / (2.0 * R)) * (even_sum + even_exp_coef * pack.IexpE);

    return parts.Scond * (1.0 - M) + parts.snk * parts.gp * std::acos(M) +
           parts.snk * parts.a2_factor * (1.0 - std::sqrt(S)) +
           parts.snk * parts.codd * odd_total +
           parts.snk * parts.ceven * R * even_total;
  };
  auto evaluate = [&](double S, int K) -> double {
    if (!(S > 0.0 && S <= 1.0)) return kInf;
    return assemble(S, K, compute_integrals(S));
  };

  ConditionalBoundResult best;
  best.p = p;
  best.value = parts.trivial;
  best.branch = BoundBranch::trivial;
  best.kappa_star = parts.s2ratio;  // S = 1
  best.K_star = cfg_.K_grid.front();

  double best_logS = 0.0;
  bool found = false;
  for (std::size_t j = 0; j < cfg_.kappa_grid_size; ++j) {
    const double S = std::pow(2.0, -double(j));
    const IntegralPack pack = compute_integrals(S);
    for (int K : cfg_.K_grid) {
      const double v = assemble(S, K, pack);
      if (std::isfinite(v) && v < best.value) {
        best.value = v;
        best.branch = BoundBranch::omega_full;
        best.kappa_star = parts.s2ratio / S;
        best.K_star = K;
        best_logS = -double(j) * std::log(2.0);
        found = true;
      }
    }
  }
  if (found) {
    const double span = std::log(2.0);
    const int K = best.K_star;
    GoldenResult g = golden_minimize(
        [&](double logS) {
          const double v = evaluate(std::exp(logS), K);
          return std::isfinite(v) ? v : kInf;
        },
        best_logS - span, std::min(0.0, best_logS + span), 40);
    if (g.value < best.value) {
      best.value = g.value;
      best.kappa_star = parts.s2ratio / std::exp(g.x);
    }
  }

  std::lock_guard<std::mutex> lock(mutex_);
  cond_cache_[{n, k, p}] = best;
  return best;
}

WassersteinEvaluator& EvaluatorPool::get(double rtilde) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = evaluators_.find(rtilde);
  if (it == evaluators_.end()) {
    it = evaluators_
             .emplace(rtilde, std::make_unique<WassersteinEvaluator>(
                                  BoundedModel(rtilde, 1.0), cfg_))
             .first;
  }
  return *it->second;
}

double quantize_rtilde_up(double rtilde) {
  if (rtilde <= 2.0) return 2.0;
  const double j = std::ceil(std::log(rtilde / 2.0) / std::log(1.1) - 1e-12);
  return 2.0 * std::pow(1.1, j);
}

std::map<int, ConditionalBoundResult> WassersteinEvaluator::omega_midpoint(
    std::size_t n) const {
  if (n % 2 != 0) throw std::domain_error("omega_midpoint: n must be even");
  std::map<int, ConditionalBoundResult> out;
  for (int p : cfg_.p_grid()) out[p] = omega_conditional(n, n / 2, p);
  return out;
}

}  // namespace kmt
