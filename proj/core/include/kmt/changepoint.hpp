// Online CUSUM mean-shift detector with time-uniform thresholds built from
// per-block coupling schedules on a dyadic block grid.
#pragma once

#include <memory>
#include <optional>
#include <utility>

#include "kmt/empirical_variance.hpp"
#include "kmt/scheduler.hpp"

namespace kmt {

struct BlockGrid {
  std::vector<unsigned> L_seq;   // strictly increasing block exponents
  std::vector<std::size_t> N;    // N[i-1] = sum_{j<=i} 2^(L_j)

  static BlockGrid from_levels(std::vector<unsigned> levels);
  // L_i = i + 5 (blocks 64, 128, 256, ...) until the horizon is covered.
  static BlockGrid default_grid(std::size_t horizon);

  std::size_t blocks() const { return L_seq.size(); }
  std::size_t block_start(std::size_t i) const { return i >= 2 ? N[i - 2] : 0; }
  std::size_t block_len(std::size_t i) const { return std::size_t(1) << L_seq[i - 1]; }
  // (ell_L(k), u_L(k)); ell is 0 when k < N_1 (empty-sup convention).
  std::pair<std::size_t, std::size_t> lookup(std::size_t k) const;
};

struct DetectorConfig {
  double R = 1.0;
  double delta = 0.05;
  double delta1 = 0.01;
  double delta2 = 0.01;
  double beta = 2.0;
  BlockGrid grid;
  BoundSearchConfig bounds;
  bool exhaustive_scan = false;
  SumSplitConfig split{16, 12};

  double delta3() const { return delta - delta1 - delta2; }
  void validate() const;
};

class ChangePointDetector {
 public:
  explicit ChangePointDetector(DetectorConfig cfg,
                               std::shared_ptr<EvaluatorPool> pool = nullptr,
                               std::unique_ptr<VarianceConfidenceSequence> cs = nullptr);

  struct StepResult {
    std::size_t t = 0;
    bool alarm_now = false;
    std::size_t s_best = 0;
    double stat = 0.0;
    double threshold = 0.0;
  };

  StepResult observe(double y);
  std::size_t time() const { return t_; }
  std::optional<std::pair<std::size_t, std::size_t>> alarm() const { return alarm_; }

  double cusum(std::size_t s, std::size_t t) const;
  // g_beta(t, s, delta2) from the cached per-block thresholds.
  double g_beta(std::size_t t, std::size_t s) const;
  double threshold_C(std::size_t s, std::size_t t) const;

  double block_budget(std::size_t i) const;  // delta_{2,i}, sums to delta2
  double block_delta_star(std::size_t i) const;
  double block_threshold(std::size_t k) const;  // DeltaTilde_k
  // ((DeltaTilde_k)_{k in block i} as materialized so far, delta*_i).
  std::pair<std::vector<double>, double> block_thresholds(std::size_t i) const;
  const DetectorConfig& config() const { return cfg_; }

 private:
  struct Block {
    std::size_t start = 0;  // N_{i-1}
    std::size_t len = 0;
    double budget = 0.0;
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    std::vector<double> delta_tilde;  // filled as observations arrive
    double delta_star = 0.0;
    bool delta_star_final = false;
    std::map<double, std::vector<double>> bridge_cache;  // rtilde -> Delta values
  };

  void materialize_block(std::size_t i);
  void update_block_state();
  const std::vector<double>& bridge_values(Block& blk, double rtilde);
  std::vector<std::size_t> scan_candidates() const;

  DetectorConfig cfg_;
  std::shared_ptr<EvaluatorPool> pool_;
  std::unique_ptr<VarianceConfidenceSequence> cs_;
  std::size_t t_ = 0;
  std::vector<double> prefix_;  // prefix_[k] = Y_1 + ... + Y_k, prefix_[0] = 0
  std::vector<VarianceInterval> intervals_;
  std::vector<Block> blocks_;
  std::optional<std::pair<std::size_t, std::size_t>> alarm_;
};

struct DetectionCurvePoint {
  double shift = 0.0;
  double detection_rate = 0.0;  // alarms strictly after the change point
  double false_alarm_rate = 0.0;
  double mean_delay = 0.0;  // over detected runs
};

// Figure-1-style harness: Y_i is an average of `ell` Uniform[0,1] draws, the
// mean shifted by `shift` after T_cp. A positive oracle_sigma runs every
// detector with fixed [sigma, sigma] intervals (known-variance mode).
DetectionCurvePoint run_detection_experiment(double shift, std::size_t ell,
                                             std::size_t T_cp, std::size_t horizon,
                                             const DetectorConfig& cfg,
                                             std::size_t trials, std::uint64_t seed,
                                             int threads,
                                             std::shared_ptr<EvaluatorPool> pool,
                                             double oracle_sigma = 0.0);

}  // namespace kmt
