// JSON views of the public result types (header-only; pulls in nlohmann/json).
#pragma once

#include <json.hpp>

#include "kmt/hitting_time.hpp"
#include "kmt/scheduler.hpp"

namespace kmt {

inline nlohmann::json to_json(const ThresholdSchedule& s) {
  nlohmann::json meta;
  meta["nu0_star"] = s.meta.nu0_star;
  if (s.meta.alpha0_star) meta["alpha0_star"] = *s.meta.alpha0_star;
  if (s.meta.alpha1_star) meta["alpha1_star"] = *s.meta.alpha1_star;
  if (s.meta.delta_star) meta["delta_star"] = *s.meta.delta_star;
  meta["per_level_midpoints"] = s.meta.per_level_midpoints;
  return nlohmann::json{{"n", s.n},
                        {"alpha", s.alpha},
                        {"kind", s.kind == ScheduleKind::bridge ? "bridge" : "sum"},
                        {"meta", meta},
                        {"values", s.values}};
}

inline nlohmann::json to_json(const CrossingEstimate& c) {
  return nlohmann::json{{"point", c.point},
                        {"ci_halfwidth", c.ci_halfwidth},
                        {"paths", c.paths},
                        {"seed", c.seed}};
}

inline nlohmann::json to_json(const HittingBoundResult& r) {
  return nlohmann::json{{"bound", r.bound},
                        {"trivial", r.trivial},
                        {"crossing", to_json(r.crossing)},
                        {"alpha", r.schedule.alpha},
                        {"schedule_n", r.schedule.n}};
}

}  // namespace kmt
