// Anytime-valid variance confidence sequences and the unknown-sigma
// threshold stream built on top of them.
#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kmt/scheduler.hpp"

namespace kmt {

struct VarianceInterval {
  std::size_t k = 0;
  double sigma_lo = 0.0;
  double sigma_hi = 0.0;
};

// Interface of Assumption-style confidence sequences: intervals for sigma,
// valid simultaneously over all times with total failure budget delta.
class VarianceConfidenceSequence {
 public:
  virtual ~VarianceConfidenceSequence() = default;
  virtual VarianceInterval observe(double y) = 0;
  virtual std::size_t count() const = 0;
  virtual double delta() const = 0;
  virtual std::string estimator_id() const = 0;
};

// U-statistic (unbiased sample variance) with Hoeffding concentration and a
// pi^2/6 time-stitching of the budget; intervals clipped to [0, R/2].
class DefaultVarianceCS final : public VarianceConfidenceSequence {
 public:
  DefaultVarianceCS(double R, double delta);
  VarianceInterval observe(double y) override;
  std::size_t count() const override { return k_; }
  double delta() const override { return delta_; }
  std::string estimator_id() const override { return "ustat-hoeffding-stitched"; }

 private:
  double R_;
  double delta_;
  std::size_t k_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

// Degenerate intervals [sigma, sigma]; satisfies the anytime-valid coverage
// assumption whenever sigma is the true standard deviation (simulation use).
class FixedVarianceCS final : public VarianceConfidenceSequence {
 public:
  explicit FixedVarianceCS(double sigma) : sigma_(sigma) {}
  VarianceInterval observe(double) override {
    ++k_;
    return {k_, sigma_, sigma_};
  }
  std::size_t count() const override { return k_; }
  double delta() const override { return 0.0; }
  std::string estimator_id() const override { return "fixed-sigma"; }

 private:
  double sigma_;
  std::size_t k_ = 0;
};

struct EmpiricalThreshold {
  std::size_t k = 0;
  double sigma_lo = 0.0;
  double sigma_hi = 0.0;
  double threshold = 0.0;
  bool fallback = false;  // sigma_lo == 0, deterministic range bound emitted
};

// Streaming thresholds sigma_hat_k^U * Delta_k(alpha(1-rho), R/sigma_hat_k^L, 1)
// over a fixed horizon n. The R-tilde argument is rounded up onto the grid
// {2 * 1.1^j} so schedules can be cached; rounding up is safe by the
// R-monotonicity of the schedules.
class EmpiricalThresholdStream {
 public:
  EmpiricalThresholdStream(double R, double alpha, double rho, std::size_t horizon,
                           const BoundSearchConfig& cfg,
                           ScheduleKind kind = ScheduleKind::bridge,
                           std::unique_ptr<VarianceConfidenceSequence> cs = nullptr,
                           bool quantize_rtilde = true,
                           std::shared_ptr<EvaluatorPool> pool = nullptr);

  EmpiricalThreshold observe(double y);
  std::size_t count() const { return k_; }
  const std::vector<EmpiricalThreshold>& emitted() const { return emitted_; }

  double quantize_up(double rtilde) const;

 private:
  const std::vector<double>& schedule_for(double rtilde_quantized);

  double R_;
  double alpha_;
  double rho_;
  std::size_t horizon_;
  BoundSearchConfig cfg_;
  ScheduleKind kind_;
  bool quantize_;
  std::unique_ptr<VarianceConfidenceSequence> cs_;
  std::size_t k_ = 0;
  std::vector<EmpiricalThreshold> emitted_;
  std::map<double, std::vector<double>> schedule_cache_;
  std::shared_ptr<EvaluatorPool> pool_;
};

// Deterministic fallback for indices where sigma_hat^L == 0: an almost-sure
// range bound on |W_k| plus a Gaussian quantile allowance for |Ztilde_k|.
double fallback_threshold(double R, std::size_t n, std::size_t k, double budget,
                          ScheduleKind kind = ScheduleKind::bridge);

}  // namespace kmt
