#include <doctest.h>

#include <cmath>
#include <random>

#include "kmt/changepoint.hpp"
#include "kmt/rng.hpp"

using namespace kmt;

namespace {

DetectorConfig test_config(std::size_t horizon, std::vector<unsigned> levels = {}) {
  DetectorConfig cfg;
  cfg.R = 1.0;
  cfg.delta = 0.05;
  cfg.delta1 = 0.01;
  cfg.delta2 = 0.01;
  cfg.beta = 2.0;
  cfg.grid = levels.empty() ? BlockGrid::default_grid(horizon)
                            : BlockGrid::from_levels(std::move(levels));
  cfg.bounds.p_max = 12;
  return cfg;
}

void feed_uniform_averages(ChangePointDetector& det, std::size_t steps,
                           std::uint64_t seed, std::size_t ell = 30) {
  std::mt19937_64 rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < steps; ++i) {
    double y = 0.0;
    for (std::size_t j = 0; j < ell; ++j) y += unif(rng);
    det.observe(y / double(ell));
  }
}

}  // namespace

TEST_CASE("cusum statistic") {
  auto cfg = test_config(64);
  ChangePointDetector det(cfg);
  for (double y : {1.0, 1.0, 0.0, 0.0}) det.observe(y);
  CHECK(det.cusum(2, 4) == doctest::Approx(1.0));

  ChangePointDetector det2(cfg);
  for (double y : {0.0, 1.0, 0.0, 1.0}) det2.observe(y);
  CHECK(det2.cusum(1, 3) == doctest::Approx(0.5));

  ChangePointDetector det3(cfg);
  for (int i = 0; i < 8; ++i) det3.observe(0.4);
  for (std::size_t s = 1; s < 8; ++s) CHECK(det3.cusum(s, 8) == doctest::Approx(0.0));
  CHECK_THROWS_AS(det3.cusum(0, 4), std::domain_error);
  CHECK_THROWS_AS(det3.cusum(4, 4), std::domain_error);
}

TEST_CASE("block grid lookup") {
  const BlockGrid grid = BlockGrid::from_levels({1, 2, 3});  // N = 2, 6, 14
  CHECK(grid.N == std::vector<std::size_t>{2, 6, 14});
  CHECK(grid.lookup(5) == std::pair<std::size_t, std::size_t>{1, 2});
  CHECK(grid.lookup(6) == std::pair<std::size_t, std::size_t>{2, 2});
  CHECK(grid.lookup(1) == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(grid.lookup(2) == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK_THROWS_AS(grid.lookup(0), std::domain_error);
  CHECK_THROWS_AS(grid.lookup(15), std::domain_error);
  CHECK_THROWS_AS(BlockGrid::from_levels({3, 3}), std::domain_error);
}

TEST_CASE("per-block budgets sum to delta2") {
  auto cfg = test_config(4096);
  for (double beta : {2.0, 1.5, 3.0}) {
    cfg.beta = beta;
    ChangePointDetector d(cfg);
    double acc = 0.0;
    for (std::size_t i = 1; i <= 200; ++i) acc += d.block_budget(i);
    CHECK(acc == doctest::Approx(cfg.delta2).epsilon(1e-12));
  }
}

TEST_CASE("configuration validation") {
  auto cfg = test_config(64);
  cfg.delta1 = 0.03;
  cfg.delta2 = 0.03;  // delta1 + delta2 > delta
  CHECK_THROWS_AS(ChangePointDetector{cfg}, std::domain_error);
  auto cfg2 = test_config(64);
  cfg2.beta = 1.0;
  CHECK_THROWS_AS(ChangePointDetector{cfg2}, std::domain_error);
}

TEST_CASE("block thresholds are finite and positive on a uniform stream") {
  auto cfg = test_config(0, {6, 7, 8});
  auto pool = std::make_shared<EvaluatorPool>(cfg.bounds);
  cfg.delta2 = 0.02;
  ChangePointDetector det(cfg, pool);
  feed_uniform_averages(det, 300, 11);
  for (std::size_t k = 40; k <= 300; ++k) {
    const double v = det.block_threshold(k);
    CHECK(std::isfinite(v));
    if (k == 64 || k == 192) {
      CHECK(v == 0.0);  // bridge endpoints of the first two blocks
    } else {
      CHECK(v > 0.0);
    }
  }
  CHECK(det.block_delta_star(1) > 0.0);
  CHECK(std::isfinite(det.block_delta_star(2)));

  const auto [values, dstar] = det.block_thresholds(1);
  CHECK(values.size() == 64);
  CHECK(dstar == det.block_delta_star(1));
  CHECK(values[40 - 1] == det.block_threshold(40));
  CHECK_THROWS_AS(det.block_thresholds(9), std::domain_error);
}

TEST_CASE("g_beta matches a hand-unrolled transcription") {
  auto cfg = test_config(0, {5, 6, 7});  // N = 32, 96, 224
  auto pool = std::make_shared<EvaluatorPool>(cfg.bounds);
  ChangePointDetector det(cfg, pool);
  feed_uniform_averages(det, 120, 5);

  const auto N = cfg.grid.N;  // {32, 96, 224}
  auto dstar = [&](std::size_t i) { return det.block_delta_star(i); };
  auto dtilde = [&](std::size_t k) { return det.block_threshold(k); };

  SUBCASE("same block") {
    // s=40, t=60 both in block 2 (33..96): ell(s)=1, u(s)=u(t)=2.
    const std::size_t s = 40, t = 60;
    const double st = double(s) / double(t);
    const double expected = dstar(1) * (1.0 - st) + st * dstar(2) + dtilde(s) + st * dtilde(t);
    CHECK(det.g_beta(t, s) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("different blocks, six terms") {
    // s=50 in block 2, t=120 in block 3: ell(s)=1, u(s)=2, ell(t)=2, u(t)=3.
    const std::size_t s = 50, t = 120;
    const double st = double(s) / double(t);
    double expected = dstar(1) * (1.0 - st);
    expected += st * dstar(2) * 0.0;  // middle sum over (u(s), ell(t)] = (2, 2] empty
    const double frac_t = (double(t) - double(N[1])) / double(N[2] - N[1]);
    expected += st * frac_t * dstar(3);
    const double frac_s = (double(s) - double(N[0])) / double(N[1] - N[0]);
    expected += std::abs(frac_s - st) * dstar(2);
    expected += dtilde(s) + st * dtilde(t);
    CHECK(det.g_beta(t, s) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("first block reduces to empty sums") {
    const std::size_t s = 10, t = 20;  // both in block 1, ell(s) = 0
    const double st = double(s) / double(t);
    const double expected = st * dstar(1) + dtilde(s) + st * dtilde(t);
    CHECK(det.g_beta(t, s) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("positive everywhere") {
    for (std::size_t t : {15ul, 60ul, 110ul})
      for (std::size_t s = 1; s < t; s += 7) CHECK(det.g_beta(t, s) > 0.0);
  }
}

TEST_CASE("g_beta branches agree at block boundaries") {
  auto cfg = test_config(0, {5, 6, 7});  // N = 32, 96, 224
  auto pool = std::make_shared<EvaluatorPool>(cfg.bounds);
  ChangePointDetector det(cfg, pool);
  feed_uniform_averages(det, 150, 6);

  // At s = N_1 = 32 the partial-block term vanishes and the two printed
  // branches give the same value; compare with the explicit unequal-branch
  // formula evaluated as if s were interior to block 2 with frac_s -> 0.
  const std::size_t s = 32, t = 150;
  const double st = double(s) / double(t);
  auto dstar = [&](std::size_t i) { return det.block_delta_star(i); };
  auto dtilde = [&](std::size_t k) { return det.block_threshold(k); };
  // Interior limit s -> N_1 from block 2: ell(s)=1, u(s)=2, frac_s -> 0, and
  // the middle sum over (u(s), ell(t)] = (2, 2] is empty.
  double interior = dstar(1) * (1.0 - st);
  interior += std::abs(0.0 - st) * dstar(2);
  const double frac_t = (150.0 - 96.0) / (224.0 - 96.0);
  interior += st * frac_t * dstar(3);
  interior += dtilde(s) + st * dtilde(t);

  // The detector treats s = N_1 as ell = u = 1: the first sum carries
  // delta*_1 (1 - s/t) and the middle sum over (1, 2] picks up delta*_2 with
  // weight s/t - identical totals.
  CHECK(det.g_beta(t, s) == doctest::Approx(interior).epsilon(1e-12));
}

TEST_CASE("threshold_C closed form at t=2 and delta-monotonicity") {
  auto cfg = test_config(64);
  auto pool = std::make_shared<EvaluatorPool>(cfg.bounds);
  ChangePointDetector det(cfg, pool);
  det.observe(0.4);
  det.observe(0.6);
  const double d3 = cfg.delta3();
  const double sigma_hi = 0.5;  // R/2 while the CS is vacuous
  const double expected =
      sigma_hi * std::sqrt(2.0) *
          std::sqrt(3.0 * std::log(2.0 * 1.0 * std::sqrt(3.0) / d3)) +
      2.0 * det.g_beta(2, 1);
  CHECK(det.threshold_C(1, 2) == doctest::Approx(expected).epsilon(1e-12));

  auto cfg_loose = test_config(64);
  cfg_loose.delta = 0.2;
  ChangePointDetector det_loose(cfg_loose, pool);
  det_loose.observe(0.4);
  det_loose.observe(0.6);
  CHECK(det_loose.threshold_C(1, 2) < det.threshold_C(1, 2));

  auto bad = test_config(64);
  bad.delta = 0.019;  // delta3 <= 0
  CHECK_THROWS_AS(ChangePointDetector{bad}, std::domain_error);
}

TEST_CASE("detector decisions are deterministic") {
  auto cfg = test_config(256);
  auto pool = std::make_shared<EvaluatorPool>(cfg.bounds);
  std::vector<double> stream;
  std::mt19937_64 rng = make_stream(7, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 256; ++i) stream.push_back(unif(rng));

  ChangePointDetector a(cfg, pool), b(cfg, pool);
  for (double y : stream) {
    const auto ra = a.observe(y);
    const auto rb = b.observe(y);
    CHECK(ra.stat == rb.stat);
    CHECK(ra.threshold == rb.threshold);
    CHECK(ra.alarm_now == rb.alarm_now);
  }
}

TEST_CASE("a full-range shift is detected under oracle variance intervals") {
  auto cfg = test_config(0, {5, 6, 7, 8});
  auto pool = std::make_shared<EvaluatorPool>(cfg.bounds);
  // U[0,1] observations have sigma = sqrt(1/12); shift the mean by ~1 at t=96.
  const double sigma = std::sqrt(1.0 / 12.0);
  ChangePointDetector det(cfg, pool, std::make_unique<FixedVarianceCS>(sigma));
  std::mt19937_64 rng = make_stream(13, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t t = 0;
  for (; t < 480 && !det.alarm(); ++t) {
    const double base = 0.02 * unif(rng);
    det.observe(t < 96 ? base : 1.0 - 0.02 * unif(rng));
  }
  REQUIRE(det.alarm().has_value());
  CHECK(det.alarm()->second > 96);
}

TEST_CASE("exhaustive scan alarms no later than the pruned scan") {
  auto cfg = test_config(0, {5, 6, 7, 8});
  auto pool = std::make_shared<EvaluatorPool>(cfg.bounds);
  const double sigma = std::sqrt(1.0 / 12.0);
  auto cfg_ex = cfg;
  cfg_ex.exhaustive_scan = true;

  ChangePointDetector pruned(cfg, pool, std::make_unique<FixedVarianceCS>(sigma));
  ChangePointDetector exhaustive(cfg_ex, pool, std::make_unique<FixedVarianceCS>(sigma));
  std::mt19937_64 rng = make_stream(21, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t t = 0; t < 480; ++t) {
    const double base = 0.02 * unif(rng);
    const double y = t < 96 ? base : 1.0 - 0.02 * unif(rng);
    if (!pruned.alarm()) pruned.observe(y);
    if (!exhaustive.alarm()) exhaustive.observe(y);
  }
  REQUIRE(pruned.alarm().has_value());
  REQUIRE(exhaustive.alarm().has_value());
  CHECK(exhaustive.alarm()->second <= pruned.alarm()->second);
}

TEST_CASE("detection experiment is invariant to the thread split") {
  auto cfg = test_config(0, {5, 6});
  auto pool = std::make_shared<EvaluatorPool>(cfg.bounds);
  const auto one = run_detection_experiment(0.5, 1, 48, 90, cfg, 6, 99, 1, pool,
                                            std::sqrt(1.0 / 12.0));
  const auto two = run_detection_experiment(0.5, 1, 48, 90, cfg, 6, 99, 2, pool,
                                            std::sqrt(1.0 / 12.0));
  CHECK(one.detection_rate == two.detection_rate);
  CHECK(one.false_alarm_rate == two.false_alarm_rate);
  CHECK(one.mean_delay == two.mean_delay);
}
