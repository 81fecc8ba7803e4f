#include "kmt/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace kmt {

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// PPND16 rational approximations (Wichura, AS 241).
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("normal_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

double log_factorial(std::size_t n) { return std::lgamma(double(n) + 1.0); }

double log_binomial_coefficient(std::size_t n, std::size_t k) {
  if (k > n) return -std::numeric_limits<double>::infinity();
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double gaussian_abs_pnorm(double p) {
  if (p < 1.0) throw std::domain_error("gaussian_abs_pnorm: p < 1");
  const double log_norm =
      (std::lgamma((p + 1.0) / 2.0) - std::lgamma(0.5)) / p + 0.5 * std::log(2.0);
  return std::exp(log_norm);
}

// --- Gauss-Hermite ----------------------------------------------------------

namespace {

// Orthonormal Hermite recurrence with explicit scaling so the node solve stays
// finite for rules with several hundred points.
struct ScaledPair {
  double value;  // p_n(x) / exp(scale)
  double scale;
};

// Returns (p_n, p_{n-1}) at x, both sharing one scale.
void orthonormal_hermite(double x, std::size_t n, ScaledPair& pn, ScaledPair& pnm1) {
  double scale = 0.0;
  double pm2 = 0.0;
  double pm1 = std::pow(kPi, -0.25);
  for (std::size_t j = 0; j < n; ++j) {
    const double pj = x * std::sqrt(2.0 / double(j + 1)) * pm1 -
                      std::sqrt(double(j) / double(j + 1)) * pm2;
    pm2 = pm1;
    pm1 = pj;
    const double mag = std::max(std::abs(pm1), std::abs(pm2));
    if (mag > 1e100) {
      pm1 /= 1e100;
      pm2 /= 1e100;
      scale += std::log(1e100);
    } else if (mag > 0.0 && mag < 1e-100) {
      pm1 *= 1e100;
      pm2 *= 1e100;
      scale -= std::log(1e100);
    }
  }
  pn = {pm1, scale};
  pnm1 = {pm2, scale};
}

// Count of Gauss-Hermite nodes below x: negative pivots of the LDL^T
// factorization of J - x I for the Jacobi matrix (diag 0, off-diag
// sqrt(j/2)). Exact up to floating point, monotone in x.
std::size_t nodes_below(double x, std::size_t n) {
  std::size_t count = 0;
  double q = -x;
  if (q == 0.0) q = -1e-300;
  if (q < 0.0) ++count;
  for (std::size_t j = 1; j < n; ++j) {
    q = -x - (double(j) / 2.0) / q;
    if (q == 0.0) q = -1e-300;
    if (q < 0.0) ++count;
  }
  return count;
}

GaussHermiteRule build_gauss_hermite(std::size_t n) {
  GaussHermiteRule rule;
  rule.nodes.assign(n, 0.0);
  rule.log_weights.assign(n, 0.0);
  const double bound = std::sqrt(2.0 * double(n) + 1.0) + 1.0;
  const std::size_t m = (n + 1) / 2;
  for (std::size_t i = 0; i < m; ++i) {
    // Bisect for the (n-1-i)-th node (the i-th largest), then polish.
    const std::size_t target = n - 1 - i;  // want count(x) <= target < count(y)
    double lo = (n % 2 == 1 && i == m - 1) ? -1e-12 : 0.0;
    double hi = bound;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (nodes_below(mid, n) <= target)
        lo = mid;
      else
        hi = mid;
    }
    double z = 0.5 * (lo + hi);
    ScaledPair pn{}, pnm1{};
    for (int it = 0; it < 8; ++it) {
      orthonormal_hermite(z, n, pn, pnm1);
      const double dp = std::sqrt(2.0 * double(n)) * pnm1.value;  // same scale
      if (dp == 0.0) break;
      const double dz = pn.value / dp;
      const double znew = z - dz;
      if (!(znew > lo - 1e-9 && znew < hi + 1e-9)) break;  // keep the bracket
      z = znew;
      if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    orthonormal_hermite(z, n, pn, pnm1);
    const double log_dp =
        0.5 * std::log(2.0 * double(n)) + std::log(std::abs(pnm1.value)) + pnm1.scale;
    const double log_w = std::log(2.0) - 2.0 * log_dp;
    rule.nodes[n - 1 - i] = z;
    rule.nodes[i] = -z;
    rule.log_weights[n - 1 - i] = log_w;
    rule.log_weights[i] = log_w;
  }
  if (n % 2 == 1) rule.nodes[m - 1] = 0.0;
  return rule;
}

std::map<std::size_t, GaussHermiteRule>& gh_cache() {
  static std::map<std::size_t, GaussHermiteRule> cache;
  return cache;
}
std::mutex gh_mutex;

}  // namespace

const GaussHermiteRule& gauss_hermite_rule(std::size_t n) {
  n = std::clamp<std::size_t>(n, 16, 2048);
  std::lock_guard<std::mutex> lock(gh_mutex);
  auto it = gh_cache().find(n);
  if (it == gh_cache().end()) it = gh_cache().emplace(n, build_gauss_hermite(n)).first;
  return it->second;
}

// --- Hermite p-norms --------------------------------------------------------

namespace {

// log |He_l(x)| with sign, scaled recurrence He_{k+1} = x He_k - k He_{k-1}.
double log_abs_probabilists_hermite(unsigned l, double x) {
  if (l == 0) return 0.0;
  double scale = 0.0;
  double hm1 = 1.0;  // He_0
  double h = x;      // He_1
  for (unsigned k = 1; k < l; ++k) {
    const double hn = x * h - double(k) * hm1;
    hm1 = h;
    h = hn;
    const double mag = std::max(std::abs(h), std::abs(hm1));
    if (mag > 1e100) {
      h /= 1e100;
      hm1 /= 1e100;
      scale += std::log(1e100);
    }
  }
  if (h == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(std::abs(h)) + scale;
}

double hermite_pnorm_numeric(unsigned l, double p, std::size_t nodes) {
  const GaussHermiteRule& rule = gauss_hermite_rule(nodes);
  // E|He_l(Z)|^p = (1/sqrt(pi)) * sum_i w_i |He_l(sqrt(2) t_i)|^p
  double acc = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double la = log_abs_probabilists_hermite(l, std::sqrt(2.0) * rule.nodes[i]);
    if (la == -std::numeric_limits<double>::infinity()) continue;
    acc = log_add_exp(acc, rule.log_weights[i] + p * la);
  }
  const double log_moment = acc - 0.5 * std::log(kPi);
  return std::exp(log_moment / p);
}

}  // namespace

HermiteNorm hermite_pnorm_checked(unsigned l, double p, HermiteNormMode mode) {
  if (p < 2.0) throw std::domain_error("hermite_pnorm: p < 2");
  const double analytic =
      std::exp(0.5 * log_factorial(l) + 0.5 * double(l) * std::log(p - 1.0));
  if (l == 0) return {1.0, false};
  if (mode == HermiteNormMode::analytic_bound) return {analytic, true};
  // Even integer p integrates the degree-l*p polynomial exactly once the rule
  // has > l*p/2 points; other p just benefit from the margin.
  const std::size_t base = std::max<std::size_t>(256, std::size_t(l * p / 2.0) + 24);
  const double v1 = hermite_pnorm_numeric(l, p, base);
  const double v2 = hermite_pnorm_numeric(l, p, base + 97);
  const double tol = 1e-9 * std::max(1.0, std::abs(v1));
  if (!std::isfinite(v1) || !std::isfinite(v2) || std::abs(v1 - v2) > tol) {
    return {analytic, true};
  }
  return {std::min(v2, analytic), false};
}

double hermite_pnorm(unsigned l, double p, HermiteNormMode mode) {
  return hermite_pnorm_checked(l, p, mode).value;
}

// --- Binomial p-norm --------------------------------------------------------

double binomial_pnorm(std::size_t n, double q, double p) {
  if (n == 0) return 0.0;
  if (q < 0.0 || q > 1.0) throw std::domain_error("binomial_pnorm: q outside [0,1]");
  if (p < 1.0) throw std::domain_error("binomial_pnorm: p < 1");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return double(n);
  const double lq = std::log(q);
  const double l1q = std::log1p(-q);
  double acc = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j <= n; ++j) {
    const double term = log_binomial_coefficient(n, j) + double(j) * lq +
                        double(n - j) * l1q + p * std::log(double(j));
    acc = log_add_exp(acc, term);
  }
  return std::exp(acc / p);
}

// --- Adaptive Gauss-Kronrod -------------------------------------------------

namespace {

// 15-point Kronrod nodes/weights with embedded 7-point Gauss rule, on [-1,1].
constexpr double kKronrodNodes[15] = {
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144838258730, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245,  0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,  0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,  0.949107912342758524526189684047851,
    0.991455371120812639206854697526329};
constexpr double kKronrodWeights[15] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970};
constexpr double kGaussWeights[7] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082};

struct PanelEstimate {
  double value;
  double error;
  bool finite;
};

PanelEstimate gauss_kronrod(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double gk = 0.0, g7 = 0.0;
  for (int i = 0; i < 15; ++i) {
    const double fx = f(c + h * kKronrodNodes[i]);
    if (!std::isfinite(fx)) return {fx, std::numeric_limits<double>::infinity(), false};
    gk += kKronrodWeights[i] * fx;
    if (i % 2 == 1) g7 += kGaussWeights[i / 2] * fx;
  }
  gk *= h;
  g7 *= h;
  // Plain |GK15 - G7| error: conservative around kinks and endpoint layers.
  const double diff = std::abs(gk - g7);
  return {gk, diff, true};
}

}  // namespace

IntegrationResult integrate_adaptive(const std::function<double(double)>& f, double a,
                                     double b, bool singular_lower,
                                     const QuadratureConfig& cfg) {
  if (!(a < b)) throw std::domain_error("integrate: requires a < b");
  if (cfg.rel_tol <= 0.0 || cfg.abs_tol <= 0.0 || cfg.max_subdivisions < 16)
    throw std::domain_error("integrate: invalid QuadratureConfig");
  std::function<double(double)> g;
  double lo = a, hi = b;
  if (singular_lower) {
    // y = a + u^2, dy = 2u du
    lo = 0.0;
    hi = std::sqrt(b - a);
    g = [&f, a](double u) { return 2.0 * u * f(a + u * u); };
  } else {
    g = f;
  }

  struct Panel {
    double a, b, value, error;
  };
  std::vector<Panel> heap;
  IntegrationResult out;

  PanelEstimate first = gauss_kronrod(g, lo, hi);
  if (!first.finite) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  heap.push_back({lo, hi, first.value, first.error});
  double total = first.value, total_err = first.error;

  std::size_t splits = 0;
  while (total_err > std::max(cfg.abs_tol, cfg.rel_tol * std::abs(total)) &&
         splits < cfg.max_subdivisions) {
    std::size_t worst = 0;
    for (std::size_t i = 1; i < heap.size(); ++i)
      if (heap[i].error > heap[worst].error) worst = i;
    const Panel panel = heap[worst];
    const double mid = 0.5 * (panel.a + panel.b);
    if (mid <= panel.a || mid >= panel.b) break;  // panel at machine resolution
    PanelEstimate left = gauss_kronrod(g, panel.a, mid);
    PanelEstimate right = gauss_kronrod(g, mid, panel.b);
    if (!left.finite || !right.finite) {
      out.value = std::numeric_limits<double>::infinity();
      out.subdivisions = splits;
      return out;
    }
    total += left.value + right.value - panel.value;
    total_err += left.error + right.error - panel.error;
    heap[worst] = {panel.a, mid, left.value, left.error};
    heap.push_back({mid, panel.b, right.value, right.error});
    ++splits;
  }

  out.value = total;
  out.error_bound = total_err;
  out.subdivisions = splits;
  out.converged = total_err <= std::max(cfg.abs_tol, cfg.rel_tol * std::abs(total));
  return out;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 bool singular_lower, const QuadratureConfig& cfg) {
  IntegrationResult r = integrate_adaptive(f, a, b, singular_lower, cfg);
  if (!r.converged) {
    throw QuadratureError("integrate: tolerance not met within max_subdivisions",
                          r.value, r.error_bound);
  }
  return r.value;
}

}  // namespace kmt
