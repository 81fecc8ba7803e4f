#include "kmt/empirical_variance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kmt {

DefaultVarianceCS::DefaultVarianceCS(double R, double delta) : R_(R), delta_(delta) {
  if (!(R > 0.0)) throw std::domain_error("DefaultVarianceCS: R must be positive");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::domain_error("DefaultVarianceCS: delta outside (0,1)");
}

VarianceInterval DefaultVarianceCS::observe(double y) {
  ++k_;
  sum_ += y;
  sum_sq_ += y * y;
  VarianceInterval iv;
  iv.k = k_;
  if (k_ < 2) {
    iv.sigma_lo = 0.0;
    iv.sigma_hi = R_ / 2.0;
    return iv;
  }
  const double dk = double(k_);
  // Unbiased sample variance is a U-statistic with kernel (y-y')^2/2 in
  // [0, R^2/2]; Hoeffding for U-statistics with floor(k/2) effective blocks.
  const double u = (dk * sum_sq_ - sum_ * sum_) / (dk * (dk - 1.0));
  const double delta_k = delta_ * 6.0 / (kPi * kPi * dk * dk);
  const double blocks = std::floor(dk / 2.0);
  const double t = R_ * R_ * std::sqrt(std::log(2.0 / delta_k) / (8.0 * blocks));
  iv.sigma_lo = std::min(std::sqrt(std::max(0.0, u - t)), R_ / 2.0);
  iv.sigma_hi = std::min(std::sqrt(std::max(0.0, u + t)), R_ / 2.0);
  return iv;
}

double fallback_threshold(double R, std::size_t n, std::size_t k, double budget,
                          ScheduleKind kind) {
  const double z =
      std::max(0.0, normal_quantile(1.0 - std::clamp(budget, 1e-15, 1.0 - 1e-15)));
  if (kind == ScheduleKind::sum) {
    // |S_k| <= k R almost surely; Gaussian part has sd sigma sqrt(k) <= R sqrt(k)/2.
    return double(k) * R + 0.5 * R * std::sqrt(double(k)) * z;
  }
  const double frac = double(k) * double(n - k) / double(n);
  return 2.0 * frac * R + 0.5 * R * std::sqrt(frac) * z;
}

EmpiricalThresholdStream::EmpiricalThresholdStream(
    double R, double alpha, double rho, std::size_t horizon,
    const BoundSearchConfig& cfg, ScheduleKind kind,
    std::unique_ptr<VarianceConfidenceSequence> cs, bool quantize_rtilde,
    std::shared_ptr<EvaluatorPool> pool)
    : R_(R),
      alpha_(alpha),
      rho_(rho),
      horizon_(horizon),
      cfg_(cfg),
      kind_(kind),
      quantize_(quantize_rtilde),
      cs_(std::move(cs)),
      pool_(std::move(pool)) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("EmpiricalThresholdStream: alpha outside (0,1)");
  if (!(rho > 0.0 && rho < 1.0))
    throw std::domain_error("EmpiricalThresholdStream: rho outside (0,1)");
  if (horizon_ < 1) throw std::domain_error("EmpiricalThresholdStream: empty horizon");
  if (kind_ == ScheduleKind::sum && (horizon_ & (horizon_ - 1)) != 0)
    throw std::domain_error("EmpiricalThresholdStream: sum kind needs a dyadic horizon");
  if (!cs_) cs_ = std::make_unique<DefaultVarianceCS>(R_, rho_ * alpha_);
  if (!pool_) pool_ = std::make_shared<EvaluatorPool>(cfg_);
}

double EmpiricalThresholdStream::quantize_up(double rtilde) const {
  if (!quantize_) return std::max(2.0, rtilde);
  return quantize_rtilde_up(rtilde);
}

const std::vector<double>& EmpiricalThresholdStream::schedule_for(double rt) {
  auto it = schedule_cache_.find(rt);
  if (it != schedule_cache_.end()) return it->second;
  WassersteinEvaluator& ev = pool_->get(rt);
  const double budget = alpha_ * (1.0 - rho_);
  ThresholdSchedule sched = (kind_ == ScheduleKind::bridge)
                                ? build_bridge_schedule(ev, horizon_, budget)
                                : build_sum_schedule(ev, horizon_, budget);
  return schedule_cache_.emplace(rt, std::move(sched.values)).first->second;
}

EmpiricalThreshold EmpiricalThresholdStream::observe(double y) {
  if (k_ >= horizon_)
    throw std::domain_error("EmpiricalThresholdStream: horizon exhausted");
  const VarianceInterval iv = cs_->observe(y);
  ++k_;
  EmpiricalThreshold out;
  out.k = k_;
  out.sigma_lo = iv.sigma_lo;
  out.sigma_hi = iv.sigma_hi;
  if (iv.sigma_lo <= 0.0) {
    out.fallback = true;
    if (k_ == horizon_ && kind_ == ScheduleKind::bridge) {
      out.threshold = 0.0;
    } else {
      out.threshold = fallback_threshold(R_, horizon_, std::min(k_, horizon_ - 1),
                                         alpha_ * (1.0 - rho_), kind_);
    }
    emitted_.push_back(out);
    return out;
  }
  const double rt = quantize_up(R_ / iv.sigma_lo);
  const std::vector<double>& values = schedule_for(rt);
  out.threshold = iv.sigma_hi * values[k_ - 1];
  emitted_.push_back(out);
  return out;
}

}  // namespace kmt
