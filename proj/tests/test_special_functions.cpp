#include <doctest.h>

#include <cmath>
#include <random>

#include "kmt/special_functions.hpp"

using namespace kmt;

TEST_CASE("gaussian_abs_pnorm closed forms") {
  CHECK(gaussian_abs_pnorm(2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gaussian_abs_pnorm(1.0) ==
        doctest::Approx(std::sqrt(2.0 / kPi)).epsilon(1e-12));
  // E Z^4 = 3 by Isserlis, so ||Z||_4 = 3^(1/4).
  CHECK(gaussian_abs_pnorm(4.0) == doctest::Approx(std::pow(3.0, 0.25)).epsilon(1e-12));
  CHECK_THROWS_AS(gaussian_abs_pnorm(0.5), std::domain_error);
}

TEST_CASE("gaussian_abs_pnorm matches Monte Carlo at p=4") {
  std::mt19937_64 rng(123456);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t samples = 10'000'000;
  double acc = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double z = gauss(rng);
    acc += z * z * z * z;
  }
  const double mc = std::pow(acc / double(samples), 0.25);
  CHECK(gaussian_abs_pnorm(4.0) == doctest::Approx(mc).epsilon(5e-3));
}

TEST_CASE("gaussian_abs_pnorm is nondecreasing in p") {
  double prev = gaussian_abs_pnorm(1.0);
  for (double p = 1.5; p <= 64.0; p += 0.5) {
    const double cur = gaussian_abs_pnorm(p);
    CHECK(cur >= prev - 1e-12);
    prev = cur;
  }
}

TEST_CASE("hermite_pnorm closed forms") {
  CHECK(hermite_pnorm(0, 7.0) == doctest::Approx(1.0));
  CHECK(hermite_pnorm(2, 2.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  // E H_3^2 = 3! by orthogonality.
  CHECK(hermite_pnorm(3, 2.0) == doctest::Approx(std::sqrt(6.0)).epsilon(1e-9));
}

TEST_CASE("hermite analytic bound dominates the numeric norm") {
  for (unsigned l = 0; l <= 20; ++l) {
    for (int p = 2; p <= 12; ++p) {
      const double numeric = hermite_pnorm(l, p, HermiteNormMode::numeric_quadrature);
      const double analytic = hermite_pnorm(l, p, HermiteNormMode::analytic_bound);
      CHECK(numeric <= analytic + 1e-9);
      CHECK(analytic == doctest::Approx(std::sqrt(std::tgamma(l + 1.0)) *
                                        std::pow(p - 1.0, l / 2.0))
                            .epsilon(1e-10));
    }
  }
}

TEST_CASE("hermite bound-mode flag reports fallbacks") {
  const HermiteNorm good = hermite_pnorm_checked(3, 2.0, HermiteNormMode::numeric_quadrature);
  CHECK(!good.bound_mode);
  const HermiteNorm forced = hermite_pnorm_checked(3, 2.0, HermiteNormMode::analytic_bound);
  CHECK(forced.bound_mode);
}

TEST_CASE("binomial_pnorm closed forms and exact-sum oracle") {
  CHECK(binomial_pnorm(1, 0.25, 3.0) ==
        doctest::Approx(std::pow(0.25, 1.0 / 3.0)).epsilon(1e-12));
  CHECK(binomial_pnorm(5, 1.0, 2.0) == doctest::Approx(5.0));
  CHECK(binomial_pnorm(7, 0.0, 2.0) == doctest::Approx(0.0));

  // n=10, q=0.3, p=4: the 11-term sum is its own oracle.
  const std::size_t n = 10;
  const double q = 0.3, p = 4.0;
  double direct = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    double coeff = 1.0;
    for (std::size_t i = 0; i < j; ++i) coeff *= double(n - i) / double(j - i);
    direct += coeff * std::pow(q, double(j)) * std::pow(1.0 - q, double(n - j)) *
              std::pow(double(j), p);
  }
  CHECK(binomial_pnorm(n, q, p) == doctest::Approx(std::pow(direct, 1.0 / p)).epsilon(1e-10));
}

TEST_CASE("binomial_pnorm matches simulation") {
  std::mt19937_64 rng(777);
  std::binomial_distribution<int> binom(10, 0.3);
  const std::size_t samples = 1'000'000;
  double acc = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double j = double(binom(rng));
    acc += j * j * j * j;
  }
  const double mc = std::pow(acc / double(samples), 0.25);
  CHECK(binomial_pnorm(10, 0.3, 4.0) == doctest::Approx(mc).epsilon(2e-2));
}

TEST_CASE("binomial_pnorm is nondecreasing in n, q and p") {
  for (std::size_t n : {2ul, 5ul, 9ul})
    CHECK(binomial_pnorm(n, 0.4, 3.0) <= binomial_pnorm(n + 1, 0.4, 3.0) + 1e-12);
  for (double q : {0.1, 0.4, 0.7})
    CHECK(binomial_pnorm(6, q, 3.0) <= binomial_pnorm(6, q + 0.2, 3.0) + 1e-12);
  for (double p : {1.0, 2.0, 5.0})
    CHECK(binomial_pnorm(6, 0.4, p) <= binomial_pnorm(6, 0.4, p + 1.0) + 1e-12);
}

TEST_CASE("integrate reproduces closed-form antiderivatives") {
  CHECK(integrate([](double) { return 1.0; }, 0.0, 2.0) == doctest::Approx(2.0));
  // antiderivative 2 sqrt(y-1)
  CHECK(integrate([](double y) { return 1.0 / std::sqrt(y - 1.0); }, 1.0, 2.0, true) ==
        doctest::Approx(2.0).epsilon(1e-8));
  // antiderivative -2 y^(-1/2)
  CHECK(integrate([](double y) { return std::pow(y, -1.5); }, 1.0, 4.0) ==
        doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("integrate reports failures with the best estimate") {
  QuadratureConfig cfg;
  cfg.rel_tol = 1e-14;
  cfg.abs_tol = 1e-300;
  cfg.max_subdivisions = 16;
  bool threw = false;
  try {
    integrate([](double y) { return std::cos(500.0 * y) / std::sqrt(std::abs(y) + 1e-8); },
              0.0, 10.0, false, cfg);
  } catch (const QuadratureError& e) {
    threw = true;
    CHECK(std::isfinite(e.best_estimate));
    CHECK(e.error_bound > 0.0);
  }
  CHECK(threw);
}

TEST_CASE("integrate validates its configuration") {
  QuadratureConfig cfg;
  cfg.max_subdivisions = 4;
  CHECK_THROWS_AS(integrate([](double) { return 1.0; }, 0.0, 1.0, false, cfg),
                  std::domain_error);
  CHECK_THROWS_AS(integrate([](double) { return 1.0; }, 1.0, 0.0), std::domain_error);
}

TEST_CASE("normal quantile inverts the cdf") {
  for (double u : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.9, 0.999, 1.0 - 1e-9}) {
    CHECK(normal_cdf(normal_quantile(u)) == doctest::Approx(u).epsilon(1e-10));
  }
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
}
