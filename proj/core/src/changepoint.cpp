#include "kmt/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

#include "kmt/rng.hpp"

namespace kmt {

BlockGrid BlockGrid::from_levels(std::vector<unsigned> levels) {
  if (levels.empty()) throw std::domain_error("BlockGrid: empty level sequence");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (levels[i] <= levels[i - 1])
      throw std::domain_error("BlockGrid: levels must strictly increase");
  BlockGrid grid;
  grid.L_seq = std::move(levels);
  std::size_t acc = 0;
  for (unsigned L : grid.L_seq) {
    acc += std::size_t(1) << L;
    grid.N.push_back(acc);
  }
  return grid;
}

BlockGrid BlockGrid::default_grid(std::size_t horizon) {
  std::vector<unsigned> levels;
  unsigned L = 6;
  std::size_t acc = 0;
  while (acc < horizon || levels.empty()) {
    levels.push_back(L);
    acc += std::size_t(1) << L;
    ++L;
  }
  return from_levels(std::move(levels));
}

std::pair<std::size_t, std::size_t> BlockGrid::lookup(std::size_t k) const {
  if (k < 1) throw std::domain_error("BlockGrid::lookup: k >= 1 required");
  if (k > N.back()) throw std::domain_error("BlockGrid::lookup: k beyond the grid");
  std::size_t ell = 0;
  while (ell < N.size() && k >= N[ell]) ++ell;  // ell = count of N_i <= k
  std::size_t u = 0;
  while (N[u] < k) ++u;
  return {ell, u + 1};
}

void DetectorConfig::validate() const {
  if (!(R > 0.0)) throw std::domain_error("DetectorConfig: R must be positive");
  if (!(delta > 0.0 && delta < 1.0) || !(delta1 > 0.0) || !(delta2 > 0.0))
    throw std::domain_error("DetectorConfig: deltas outside (0,1)");
  if (!(delta1 + delta2 < delta))
    throw std::domain_error("DetectorConfig: requires delta1 + delta2 < delta");
  if (!(beta > 1.0)) throw std::domain_error("DetectorConfig: beta must exceed 1");
  if (grid.L_seq.empty()) throw std::domain_error("DetectorConfig: empty block grid");
}

ChangePointDetector::ChangePointDetector(DetectorConfig cfg,
                                         std::shared_ptr<EvaluatorPool> pool,
                                         std::unique_ptr<VarianceConfidenceSequence> cs)
    : cfg_(std::move(cfg)), pool_(std::move(pool)), cs_(std::move(cs)) {
  cfg_.validate();
  if (!pool_) pool_ = std::make_shared<EvaluatorPool>(cfg_.bounds);
  if (!cs_) cs_ = std::make_unique<DefaultVarianceCS>(cfg_.R, cfg_.delta1);
  prefix_.push_back(0.0);
}

double ChangePointDetector::block_budget(std::size_t i) const {
  // delta_2 beta^{-(i-1)} normalized by sum_{j>=0} beta^{-j}; sums to delta2.
  const double beta = cfg_.beta;
  const double normalizer = beta / (beta - 1.0);
  return cfg_.delta2 * std::pow(beta, -double(i - 1)) / normalizer;
}

const std::vector<double>& ChangePointDetector::bridge_values(Block& blk,
                                                              double rtilde) {
  auto it = blk.bridge_cache.find(rtilde);
  if (it != blk.bridge_cache.end()) return it->second;
  WassersteinEvaluator& ev = pool_->get(rtilde);
  ThresholdSchedule sched = build_bridge_schedule(ev, blk.len, blk.alpha0);
  return blk.bridge_cache.emplace(rtilde, std::move(sched.values)).first->second;
}

void ChangePointDetector::materialize_block(std::size_t i) {
  Block blk;
  blk.start = cfg_.grid.block_start(i);
  blk.len = cfg_.grid.block_len(i);
  blk.budget = block_budget(i);
  blk.delta_tilde.assign(blk.len, 0.0);

  // Split optimization at block entry, using the newest interval as a proxy
  // for the block; any split is valid, only tightness is affected.
  const VarianceInterval& iv = intervals_.back();
  if (iv.sigma_lo > 0.0) {
    const double rt = quantize_rtilde_up(cfg_.R / iv.sigma_lo);
    WassersteinEvaluator& ev = pool_->get(rt);
    ThresholdSchedule proxy = build_sum_schedule(ev, blk.len, blk.budget, cfg_.split);
    blk.alpha0 = *proxy.meta.alpha0_star;
    blk.alpha1 = *proxy.meta.alpha1_star;
  } else {
    blk.alpha0 = blk.budget / 2.0;
    blk.alpha1 = blk.budget - blk.alpha0;
  }
  blocks_.push_back(std::move(blk));
}

void ChangePointDetector::update_block_state() {
  Block& blk = blocks_.back();
  const VarianceInterval& iv = intervals_[t_ - 1];
  const std::size_t rel = t_ - blk.start;  // 1-based inside the block

  if (iv.sigma_lo > 0.0) {
    const double rt = quantize_rtilde_up(cfg_.R / iv.sigma_lo);
    const std::vector<double>& values = bridge_values(blk, rt);
    blk.delta_tilde[rel - 1] = iv.sigma_hi * values[rel - 1];
  } else {
    blk.delta_tilde[rel - 1] =
        (rel == blk.len) ? 0.0
                         : fallback_threshold(cfg_.R, blk.len, rel, blk.alpha0);
  }

  if (!blk.delta_star_final) {
    if (iv.sigma_lo > 0.0) {
      const double rt = quantize_rtilde_up(cfg_.R / iv.sigma_lo);
      WassersteinEvaluator& ev = pool_->get(rt);
      double best = std::numeric_limits<double>::infinity();
      for (int p : cfg_.bounds.p_grid())
        best = std::min(best, ev.marginal_bound(blk.len, p) /
                                   std::pow(blk.alpha1, 1.0 / p));
      blk.delta_star = iv.sigma_hi * best;
    } else {
      const double z = std::max(0.0, normal_quantile(1.0 - blk.alpha1));
      blk.delta_star =
          double(blk.len) * cfg_.R + 0.5 * cfg_.R * std::sqrt(double(blk.len)) * z;
    }
    if (rel == blk.len) blk.delta_star_final = true;
  }
}

double ChangePointDetector::block_delta_star(std::size_t i) const {
  if (i < 1 || i > blocks_.size())
    throw std::domain_error("block_delta_star: block not materialized");
  return blocks_[i - 1].delta_star;
}

double ChangePointDetector::block_threshold(std::size_t k) const {
  if (k < 1 || k > t_) throw std::domain_error("block_threshold: k not observed");
  const auto [ell, u] = cfg_.grid.lookup(k);
  const Block& blk = blocks_[u - 1];
  return blk.delta_tilde[k - blk.start - 1];
}

std::pair<std::vector<double>, double> ChangePointDetector::block_thresholds(
    std::size_t i) const {
  if (i < 1 || i > blocks_.size())
    throw std::domain_error("block_thresholds: block not materialized");
  const Block& blk = blocks_[i - 1];
  return {blk.delta_tilde, blk.delta_star};
}

double ChangePointDetector::cusum(std::size_t s, std::size_t t) const {
  if (!(s >= 1 && s < t && t <= t_)) throw std::domain_error("cusum: need 0 < s < t <= now");
  const double left = prefix_[s] / double(s);
  const double right = (prefix_[t] - prefix_[s]) / double(t - s);
  return std::abs(left - right);
}

double ChangePointDetector::g_beta(std::size_t t, std::size_t s) const {
  if (!(s >= 1 && s < t && t <= t_))
    throw std::domain_error("g_beta: need 0 < s < t <= now");
  const auto [ls, us] = cfg_.grid.lookup(s);
  const auto [lt, ut] = cfg_.grid.lookup(t);
  if (ut > blocks_.size()) throw std::domain_error("g_beta: materialize blocks first");
  const double st = double(s) / double(t);
  auto N_of = [&](std::size_t i) { return i == 0 ? 0.0 : double(cfg_.grid.N[i - 1]); };
  auto dstar = [&](std::size_t i) { return blocks_[i - 1].delta_star; };
  auto dtilde = [&](std::size_t k) {
    const auto [lk, uk] = cfg_.grid.lookup(k);
    const Block& blk = blocks_[uk - 1];
    return blk.delta_tilde[k - blk.start - 1];
  };

  double g = 0.0;
  for (std::size_t k = 1; k <= ls; ++k) g += dstar(k) * (1.0 - st);
  if (us == ut) {
    g += st * dstar(us) + dtilde(s) + st * dtilde(t);
    return g;
  }
  for (std::size_t k = us + 1; k <= lt; ++k) g += st * dstar(k);
  if (lt < ut) {
    const double frac_t = (double(t) - N_of(lt)) / (N_of(ut) - N_of(lt));
    g += st * frac_t * dstar(ut);
  }
  if (ls < us) {
    const double frac_s = (double(s) - N_of(ls)) / (N_of(us) - N_of(ls));
    g += std::abs(frac_s - st) * dstar(us);
  }
  g += dtilde(s) + st * dtilde(t);
  return g;
}

double ChangePointDetector::threshold_C(std::size_t s, std::size_t t) const {
  if (!(s >= 1 && s < t && t <= t_))
    throw std::domain_error("threshold_C: need 0 < s < t <= now");
  const double d3 = cfg_.delta3();
  if (!(d3 > 0.0)) throw std::domain_error("threshold_C: delta - delta1 - delta2 <= 0");
  const double sigma_hi = intervals_[t - 1].sigma_hi;
  const double dt = double(t), ds = double(s);
  // Factor 2 inside the log comes from the time-uniform Gaussian bound.
  const double gauss =
      sigma_hi * std::sqrt(dt / (ds * (dt - ds))) *
      std::sqrt((1.0 + 1.0 / dt) * 2.0 *
                std::log(2.0 * (dt - 1.0) * std::sqrt(dt + 1.0) / d3));
  return gauss + dt / (ds * (dt - ds)) * g_beta(t, s);
}

std::vector<std::size_t> ChangePointDetector::scan_candidates() const {
  std::vector<std::size_t> out;
  if (cfg_.exhaustive_scan) {
    out.reserve(t_ - 1);
    for (std::size_t s = 1; s < t_; ++s) out.push_back(s);
    return out;
  }
  std::set<std::size_t> set;
  for (std::size_t step = 1; step < t_; step <<= 1) set.insert(t_ - step);
  for (std::size_t Ni : cfg_.grid.N)
    if (Ni < t_) set.insert(Ni);
  set.insert(1);
  out.assign(set.begin(), set.end());
  return out;
}

ChangePointDetector::StepResult ChangePointDetector::observe(double y) {
  const VarianceInterval iv = cs_->observe(y);
  ++t_;
  if (t_ > cfg_.grid.N.back())
    throw std::domain_error("ChangePointDetector: past the block grid horizon");
  prefix_.push_back(prefix_.back() + y);
  intervals_.push_back(iv);
  const auto [ell, u] = cfg_.grid.lookup(t_);
  while (blocks_.size() < u) materialize_block(blocks_.size() + 1);
  update_block_state();

  StepResult res;
  res.t = t_;
  if (t_ < 2) return res;
  double best_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t s : scan_candidates()) {
    const double stat = cusum(s, t_);
    const double thr = threshold_C(s, t_);
    if (stat - thr > best_margin) {
      best_margin = stat - thr;
      res.s_best = s;
      res.stat = stat;
      res.threshold = thr;
    }
    if (stat > thr && !alarm_) {
      alarm_ = std::make_pair(s, t_);
    }
  }
  res.alarm_now = alarm_ && alarm_->second == t_;
  return res;
}

DetectionCurvePoint run_detection_experiment(double shift, std::size_t ell,
                                             std::size_t T_cp, std::size_t horizon,
                                             const DetectorConfig& cfg,
                                             std::size_t trials, std::uint64_t seed,
                                             int threads,
                                             std::shared_ptr<EvaluatorPool> pool,
                                             double oracle_sigma) {
  if (!pool) pool = std::make_shared<EvaluatorPool>(cfg.bounds);
  const int workers = std::max(1, threads);
  std::vector<std::size_t> detected(workers, 0), false_alarms(workers, 0);
  std::vector<double> delays(workers, 0.0);

  auto run_range = [&](int w, std::size_t lo, std::size_t hi) {
    for (std::size_t trial = lo; trial < hi; ++trial) {
      std::mt19937_64 rng = make_stream(seed, trial);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      ChangePointDetector det(cfg, pool,
                              oracle_sigma > 0.0
                                  ? std::make_unique<FixedVarianceCS>(oracle_sigma)
                                  : nullptr);
      for (std::size_t i = 1; i <= horizon; ++i) {
        double y = 0.0;
        for (std::size_t j = 0; j < ell; ++j) y += unif(rng);
        y /= double(ell);
        if (i > T_cp) y += shift;
        det.observe(y);
        if (det.alarm()) break;
      }
      if (det.alarm()) {
        const std::size_t t_star = det.alarm()->second;
        if (t_star > T_cp) {
          ++detected[w];
          delays[w] += double(t_star - T_cp);
        } else {
          ++false_alarms[w];
        }
      }
    }
  };

  if (workers == 1) {
    run_range(0, 0, trials);
  } else {
    std::vector<std::thread> pool_threads;
    const std::size_t chunk = (trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t lo = std::min(trials, std::size_t(w) * chunk);
      const std::size_t hi = std::min(trials, lo + chunk);
      pool_threads.emplace_back(run_range, w, lo, hi);
    }
    for (auto& th : pool_threads) th.join();
  }

  std::size_t det_total = 0, fa_total = 0;
  double delay_total = 0.0;
  for (int w = 0; w < workers; ++w) {
    det_total += detected[w];
    fa_total += false_alarms[w];
    delay_total += delays[w];
  }
  DetectionCurvePoint out;
  out.shift = shift;
  out.detection_rate = double(det_total) / double(trials);
  out.false_alarm_rate = double(fa_total) / double(trials);
  out.mean_delay = det_total ? delay_total / double(det_total) : 0.0;
  return out;
}

}  // namespace kmt
