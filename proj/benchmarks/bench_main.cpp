// Self-contained micro-benchmarks for the hot paths: omega evaluation,
// schedule construction, coupling traces and detector steps.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "kmt/changepoint.hpp"
#include "kmt/scheduler.hpp"
#include "kmt/validation.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Case {
  std::string name;
  std::function<void()> body;
  int repeats;
};

void run(const Case& c) {
  // One warmup, then report the median of the timed repeats.
  c.body();
  std::vector<double> times;
  for (int i = 0; i < c.repeats; ++i) {
    const auto t0 = Clock::now();
    c.body();
    const auto t1 = Clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  std::printf("%-44s %10.3f ms  (min %.3f, max %.3f, n=%d)\n", c.name.c_str(),
              times[times.size() / 2], times.front(), times.back(), c.repeats);
}

}  // namespace

int main() {
  using namespace kmt;
  BoundedModel model(1.0, 0.25);
  BoundSearchConfig cfg;
  cfg.p_max = 23;

  std::vector<Case> cases;

  cases.push_back({"omega_conditional(1024, 512, p=8) cold", [&] {
                     WassersteinEvaluator fresh(model, cfg);
                     fresh.omega_conditional(1024, 512, 8);
                   },
                   5});

  WassersteinEvaluator shared(model, cfg);
  shared.omega_conditional(1024, 512, 8);
  cases.push_back({"omega_conditional(1024, 512, p=8) cached", [&] {
                     shared.omega_conditional(1024, 512, 8);
                   },
                   50});

  cases.push_back({"build_bridge_schedule(n=4096) warm cache", [&] {
                     build_bridge_schedule(shared, 4096, 0.05);
                   },
                   5});

  cases.push_back({"build_sum_schedule(n=4096) warm cache", [&] {
                     build_sum_schedule(shared, 4096, 0.05);
                   },
                   5});

  cases.push_back({"binary_dyadic_coupling(n=256)", [&] {
                     binary_dyadic_coupling(256, 0.5, 1.0, 7);
                   },
                   20});

  cases.push_back({"brute_force_conditional_wp(n=8, k=4, p=2)", [&] {
                     brute_force_conditional_wp({0, 0, 0, 1, 1, 2, 2, 2}, 4, 2.0);
                   },
                   10});

  {
    DetectorConfig dc;
    dc.R = 1.0;
    dc.grid = BlockGrid::default_grid(1024);
    dc.bounds = cfg;
    auto pool = std::make_shared<EvaluatorPool>(cfg);
    {
      // warm the pool so the benchmark measures steady-state stepping
      ChangePointDetector warm(dc, pool);
      std::mt19937_64 rng(1);
      std::uniform_real_distribution<double> U(0.0, 1.0);
      for (int i = 0; i < 1024; ++i) {
        double y = 0.0;
        for (int j = 0; j < 30; ++j) y += U(rng);
        warm.observe(y / 30.0);
      }
    }
    cases.push_back({"detector 1024 null steps (warm pool)", [dc, pool] {
                       ChangePointDetector det(dc, pool);
                       std::mt19937_64 rng(2);
                       std::uniform_real_distribution<double> U(0.0, 1.0);
                       for (int i = 0; i < 1024; ++i) {
                         double y = 0.0;
                         for (int j = 0; j < 30; ++j) y += U(rng);
                         det.observe(y / 30.0);
                       }
                     },
                     5});
  }

  for (const Case& c : cases) run(c);
  return 0;
}
