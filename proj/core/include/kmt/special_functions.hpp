// Numeric primitives shared by the bound formulas: Gaussian/Hermite/binomial
// p-norms and adaptive quadrature with an endpoint-singularity transform.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kmt {

constexpr double kPi = 3.14159265358979323846;

// --- Gaussian basics -------------------------------------------------------

double normal_pdf(double x);
double normal_cdf(double x);
// Inverse standard normal CDF (Wichura's PPND16), |error| < 1e-15 on (0,1).
double normal_quantile(double p);

double log_factorial(std::size_t n);
double log_binomial_coefficient(std::size_t n, std::size_t k);
// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

// ||Z||_p = sqrt(2) * (Gamma((p+1)/2) / Gamma(1/2))^(1/p) for Z ~ N(0,1).
double gaussian_abs_pnorm(double p);

// --- Hermite p-norms --------------------------------------------------------

enum class HermiteNormMode { numeric_quadrature, analytic_bound };

struct HermiteNorm {
  double value = 0.0;
  bool bound_mode = false;  // true when the analytic bound was substituted
};

// (E|H_l(Z)|^p)^(1/p) for the probabilists' Hermite polynomial H_l.
// numeric_quadrature uses a Gauss-Hermite rule with log-space accumulation;
// analytic_bound returns sqrt(l!) * sqrt(p-1)^l, which dominates the numeric
// value for every l and p >= 2.
HermiteNorm hermite_pnorm_checked(unsigned l, double p, HermiteNormMode mode);
double hermite_pnorm(unsigned l, double p,
                     HermiteNormMode mode = HermiteNormMode::numeric_quadrature);

// ||Binomial(n,q)||_p = (sum_j C(n,j) q^j (1-q)^(n-j) j^p)^(1/p), log-space.
double binomial_pnorm(std::size_t n, double q, double p);

// --- Adaptive quadrature ----------------------------------------------------

struct QuadratureConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  std::size_t max_subdivisions = 1u << 16;
};

struct IntegrationResult {
  double value = 0.0;
  double error_bound = 0.0;
  bool converged = false;
  std::size_t subdivisions = 0;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double best, double error_bound)
      : std::runtime_error(what), best_estimate(best), error_bound(error_bound) {}
  double best_estimate;
  double error_bound;
};

// Adaptive Gauss-Kronrod (7-15) on (a,b). With singular_lower the substitution
// y = a + u^2 absorbs an integrable (y-a)^(-1/2) divergence at the lower end.
// Returns a non-converged result with value=inf if f evaluates non-finite.
IntegrationResult integrate_adaptive(const std::function<double(double)>& f,
                                     double a, double b, bool singular_lower,
                                     const QuadratureConfig& cfg = {});

// Throwing wrapper: QuadratureError carries the best estimate on failure.
double integrate(const std::function<double(double)>& f, double a, double b,
                 bool singular_lower = false, const QuadratureConfig& cfg = {});

// --- Gauss-Hermite rule (physicists' weight exp(-x^2)) ----------------------

struct GaussHermiteRule {
  std::vector<double> nodes;        // ascending
  std::vector<double> log_weights;  // log of weights, exact even when w underflows
};

// Cached; thread-safe. n is clamped to [16, 2048].
const GaussHermiteRule& gauss_hermite_rule(std::size_t n);

}  // namespace kmt
