#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kmt/scheduler.hpp"
#include "kmt/validation.hpp"

using namespace kmt;

namespace {

BoundSearchConfig small_config(int p_max = 12) {
  BoundSearchConfig cfg;
  cfg.p_max = p_max;
  return cfg;
}

}  // namespace

TEST_CASE("beta_sequence recursion") {
  const BetaSequence seq = beta_sequence(0.01, 2);
  CHECK(seq.betas[0] == doctest::Approx(0.0));
  CHECK(seq.betas[1] == doctest::Approx(0.01));
  CHECK(seq.betas[2] == doctest::Approx(0.0299));

  const BetaSequence zeros = beta_sequence(0.0, 5);
  for (double b : zeros.betas) CHECK(b == doctest::Approx(0.0));

  CHECK(beta_sequence(1.0, 1).betas[1] == doctest::Approx(1.0));
}

TEST_CASE("beta_L is nondecreasing in level and in nu0") {
  const BetaSequence seq = beta_sequence(0.02, 8);
  for (std::size_t l = 1; l < seq.betas.size(); ++l)
    CHECK(seq.betas[l] >= seq.betas[l - 1] - 1e-15);
  CHECK(beta_sequence(0.03, 8).betas[8] >= seq.betas[8]);
}

TEST_CASE("find_nu0_star closed forms") {
  CHECK(find_nu0_star(0.05, 1) == doctest::Approx(0.05).epsilon(1e-9));
  // L=2: solve 3 nu - nu^2 = alpha.
  CHECK(find_nu0_star(0.05, 2) ==
        doctest::Approx((3.0 - std::sqrt(9.0 - 4.0 * 0.05)) / 2.0).epsilon(1e-9));
  const double v = find_nu0_star(0.05, 10);
  const double bL = beta_sequence(v, 10).betas[10];
  CHECK(bL <= 0.05 + 1e-12);
  CHECK(bL >= 0.05 - 1e-8);
  CHECK(beta_sequence(std::min(1.0, v + 1e-9), 10).betas[10] >= 0.05 - 1e-7);
  CHECK_THROWS_AS(find_nu0_star(0.0, 3), std::domain_error);
  CHECK_THROWS_AS(find_nu0_star(1.0, 3), std::domain_error);
}

TEST_CASE("bridge_from_midpoints unrolls the L=2 recursion") {
  const double d1 = 0.3, d2 = 0.5;
  const std::vector<double> values = bridge_from_midpoints({d1, d2});
  REQUIRE(values.size() == 4);
  CHECK(values[0] == doctest::Approx(d1 + d2 / 2.0));
  CHECK(values[1] == doctest::Approx(d2));
  CHECK(values[2] == doctest::Approx(d1 + d2 / 2.0));
  CHECK(values[3] == doctest::Approx(0.0));
}

TEST_CASE("bridge levels are symmetric") {
  const std::vector<double> values = bridge_from_midpoints({0.4, 0.9, 0.2, 1.3});
  const std::size_t n = values.size();
  REQUIRE(n == 16);
  for (std::size_t k = 1; k < n; ++k)
    CHECK(values[k - 1] == doctest::Approx(values[n - k - 1]));
  CHECK(values[n - 1] == 0.0);
}

TEST_CASE("bridge schedule is finite and R-monotone") {
  BoundSearchConfig cfg = small_config();
  BoundedModel m1(1.0, 0.25);
  BoundedModel m2(1.5, 0.25);
  WassersteinEvaluator e1(m1, cfg), e2(m2, cfg);
  const ThresholdSchedule s1 = build_bridge_schedule(e1, 256, 0.1);
  const ThresholdSchedule s2 = build_bridge_schedule(e2, 256, 0.1);
  CHECK(std::isfinite(s1.max_value()));
  CHECK(s1.max_value() > 0.0);
  for (std::size_t k = 1; k <= 256; ++k) CHECK(s2.at(k) >= s1.at(k) - 1e-9);
}

TEST_CASE("bridge schedule for general n truncates the dyadic construction") {
  BoundSearchConfig cfg = small_config();
  BoundedModel m(1.0, 0.25);
  WassersteinEvaluator ev(m, cfg);
  const ThresholdSchedule full = build_bridge_schedule(ev, 32, 0.1);
  const ThresholdSchedule cut = build_bridge_schedule(ev, 20, 0.1);
  REQUIRE(cut.values.size() == 20);
  for (std::size_t k = 1; k <= 20; ++k) CHECK(cut.at(k) == doctest::Approx(full.at(k)));
}

TEST_CASE("sum schedule endpoint identity and dominance over the bridge") {
  BoundSearchConfig cfg = small_config();
  BoundedModel m(1.0, 0.25);
  WassersteinEvaluator ev(m, cfg);
  const ThresholdSchedule sum = build_sum_schedule(ev, 256, 0.05);
  REQUIRE(sum.meta.delta_star.has_value());
  REQUIRE(sum.meta.alpha0_star.has_value());
  CHECK(sum.values.back() - *sum.meta.delta_star == 0.0);  // exact endpoint

  const ThresholdSchedule bridge = build_bridge_schedule(ev, 256, *sum.meta.alpha0_star);
  for (std::size_t k = 1; k <= 256; ++k) CHECK(sum.at(k) >= bridge.at(k) - 1e-12);
  CHECK_THROWS_AS(build_sum_schedule(ev, 100, 0.05), std::domain_error);
}

TEST_CASE("optimized split never loses to the fixed alpha/2 split") {
  BoundSearchConfig cfg = small_config();
  BoundedModel m(1.0, 0.25);
  WassersteinEvaluator ev(m, cfg);
  const double alpha = 0.05;
  const ThresholdSchedule opt = build_sum_schedule(ev, 1024, alpha);

  // Fixed split: bridge at alpha/2 plus the marginal quantile at alpha/2.
  const ThresholdSchedule bridge = build_bridge_schedule(ev, 1024, alpha / 2.0);
  double ds = std::numeric_limits<double>::infinity();
  for (int p : cfg.p_grid())
    ds = std::min(ds, ev.marginal_bound(1024, p) / std::pow(alpha / 2.0, 1.0 / p));
  double fixed_max = 0.0;
  for (std::size_t k = 1; k <= 1024; ++k)
    fixed_max = std::max(fixed_max, bridge.at(k) + double(k) / 1024.0 * ds);
  CHECK(opt.max_value() <= fixed_max + 1e-9);
}

TEST_CASE("schedules are deterministic and alpha-monotone") {
  BoundSearchConfig cfg = small_config();
  BoundedModel m(1.0, 0.25);
  WassersteinEvaluator ev(m, cfg);
  const ThresholdSchedule a = build_sum_schedule(ev, 64, 0.05);
  const ThresholdSchedule b = build_sum_schedule(ev, 64, 0.05);
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);

  std::vector<double> prev_bridge, prev_sum;
  for (double alpha : {0.01, 0.05, 0.1, 0.2}) {
    const ThresholdSchedule br = build_bridge_schedule(ev, 64, alpha);
    const ThresholdSchedule sm = build_sum_schedule(ev, 64, alpha);
    for (std::size_t k = 1; k <= 64; ++k) {
      if (!prev_bridge.empty()) {
        CHECK(br.at(k) <= prev_bridge[k - 1] + 1e-9);
        CHECK(sm.at(k) <= prev_sum[k - 1] + 1e-9);
      }
    }
    prev_bridge = br.values;
    prev_sum = sm.values;
  }
}

TEST_CASE("variant with unit weights and no zeta reproduces the base algorithm") {
  BoundSearchConfig cfg = small_config();
  BoundedModel m(1.0, 0.25);
  WassersteinEvaluator ev(m, cfg);
  VariantConfig unit;
  unit.level_weights.assign(8, 1.0);
  unit.zeta_enabled = false;
  const ThresholdSchedule base = build_bridge_schedule(ev, 256, 0.1);
  const ThresholdSchedule variant = build_bridge_schedule(ev, 256, 0.1, &unit);
  REQUIRE(base.values.size() == variant.values.size());
  for (std::size_t i = 0; i < base.values.size(); ++i)
    CHECK(base.values[i] == variant.values[i]);
}

TEST_CASE("geometric level weights never worsen the schedule") {
  BoundSearchConfig cfg = small_config();
  BoundedModel m(1.0, 0.25);
  WassersteinEvaluator ev(m, cfg);
  VariantConfig geo = VariantConfig::geometric(1.5, 8);
  const ThresholdSchedule base = build_bridge_schedule(ev, 256, 0.1);
  const ThresholdSchedule weighted = build_bridge_schedule(ev, 256, 0.1, &geo);
  CHECK(std::isfinite(weighted.max_value()));
  CHECK(weighted.max_value() > 0.0);
  CHECK(base.max_value() > 0.0);
}

TEST_CASE("zeta fallback closed forms") {
  BoundedModel m(1.0, 0.25);
  CHECK(zeta_fallback(8, m, 0.5) == doctest::Approx(8.0 * m.R_s));
  for (double b : {0.01, 0.2, 0.9}) CHECK(zeta_fallback(8, m, b) >= 8.0 * m.R_s - 1e-12);
  CHECK_THROWS_AS(zeta_fallback(8, m, 0.0), std::domain_error);
}

TEST_CASE("zeta fallback covers the midpoint deviation empirically") {
  // n=16 binary coupling; P(|W_8 - Ztilde_8| >= zeta(b)) <= b with b = 0.2.
  BoundedModel m(1.0, 0.5);
  const double b = 0.2;
  const double z = zeta_fallback(8, m, b);
  std::size_t exceed = 0;
  const std::size_t trials = 2000;
  for (std::size_t t = 0; t < trials; ++t) {
    const CouplingTrace tr = binary_dyadic_coupling(16, 0.5, 1.0, 555 + t);
    if (std::abs(tr.W[7] - tr.Ztilde[7]) >= z) ++exceed;
  }
  CHECK(double(exceed) / double(trials) <= b + 3.0 * std::sqrt(b / double(trials)));
}

TEST_CASE("zeta-enabled variant output stays valid and finite") {
  BoundSearchConfig cfg = small_config();
  BoundedModel m(1.0, 0.25);
  WassersteinEvaluator ev(m, cfg);
  VariantConfig geo = VariantConfig::geometric(2.0, 8);
  geo.zeta_enabled = true;
  const ThresholdSchedule sched = build_bridge_schedule(ev, 256, 0.1, &geo);
  CHECK(std::isfinite(sched.max_value()));
  for (std::size_t k = 1; k < 256; ++k) CHECK(sched.at(k) > 0.0);
}

TEST_CASE("csv serialization shape") {
  BoundSearchConfig cfg = small_config();
  BoundedModel m(1.0, 0.25);
  WassersteinEvaluator ev(m, cfg);
  const ThresholdSchedule sched = build_sum_schedule(ev, 16, 0.1);
  std::ostringstream os;
  sched.write_csv(os);
  const std::string text = os.str();
  CHECK(text.rfind("k,value\n", 0) == 0);
  std::size_t rows = 0;
  for (char c : text)
    if (c == '\n') ++rows;
  CHECK(rows == 17);  // header + 16 rows
}
