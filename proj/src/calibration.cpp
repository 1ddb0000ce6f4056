#include "eero/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <string>

#include "eero/scoring.hpp"

namespace eero {

ScoreCdf::ScoreCdf(std::vector<double> scores, std::size_t head) : sorted_(std::move(scores)), head_(head) {
  if (sorted_.empty()) throw Error(ErrorCode::EmptyCalibration, "no calibration scores for head " + std::to_string(head + 1));
  std::sort(sorted_.begin(), sorted_.end());
}

double ScoreCdf::operator()(double t) const noexcept {
  const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), t) - sorted_.begin();
  return static_cast<double>(count) / static_cast<double>(sorted_.size());
}

double ScoreCdf::quantile_threshold(double level) const noexcept {
  if (level <= 0.0) return -std::numeric_limits<double>::infinity();
  const std::size_t n = sorted_.size();
  // Smallest k in [1, n] with k / n >= level, using the same floating-point
  // expression as operator() so the two decision paths agree exactly.
  std::size_t lo = 1;
  std::size_t hi = n;
  if (static_cast<double>(n) / static_cast<double>(n) < level) return std::numeric_limits<double>::infinity();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (static_cast<double>(mid) / static_cast<double>(n) >= level) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return sorted_[lo - 1];
}

ScoreCdf build_cdf(const HeadBank& bank, std::size_t head, const ScoreSpec& spec, Split split) {
  const auto& probs = bank.head(head).probs;
  std::vector<double> scores(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    scores[i] = score_row(probs.row(i), head, instance_key(split, i), spec).score;
  }
  return ScoreCdf(std::move(scores), head);
}

std::vector<double> sequential_rates(std::span<const double> epsilons, std::size_t calibration_size,
                                     RateCorrection correction) {
  if (epsilons.empty()) throw Error(ErrorCode::NotOnSimplex, "empty rate vector");
  if (calibration_size == 0) throw Error(ErrorCode::EmptyCalibration, "calibration size must be positive");
  double total = 0.0;
  for (double e : epsilons) {
    if (!(e >= -1e-12) || !std::isfinite(e)) throw Error(ErrorCode::NotOnSimplex, "negative or non-finite rate");
    total += e;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::NotOnSimplex, "rates sum to " + std::to_string(total));
  }

  const double factor =
      correction == RateCorrection::Proportional ? 1.0 + 1.0 / std::sqrt(static_cast<double>(calibration_size)) : 1.0;
  std::vector<double> out(epsilons.size());
  double cumulative = 0.0;
  for (std::size_t l = 0; l < epsilons.size(); ++l) {
    cumulative += std::max(epsilons[l], 0.0);
    out[l] = std::min(1.0, cumulative * factor);
  }
  // Rounding can make the running sum dip; keep it monotone.
  for (std::size_t l = 1; l < out.size(); ++l) out[l] = std::max(out[l], out[l - 1]);
  out.back() = 1.0;
  return out;
}

ExitPolicy policy_from_rates(std::span<const ScoreCdf> cdfs, std::vector<double> seq_rates, const ScoreSpec& spec) {
  if (cdfs.size() != seq_rates.size()) {
    throw Error(ErrorCode::HeadCountMismatch, std::to_string(cdfs.size()) + " CDFs for " +
                                                  std::to_string(seq_rates.size()) + " rates");
  }
  ExitPolicy policy;
  policy.score = spec;
  policy.calibration_size = cdfs.front().size();
  policy.thresholds.resize(cdfs.size());
  for (std::size_t l = 0; l < cdfs.size(); ++l) {
    policy.thresholds[l] = seq_rates[l] >= 1.0 ? -std::numeric_limits<double>::infinity()
                                               : cdfs[l].quantile_threshold(1.0 - seq_rates[l]);
  }
  policy.seq_rates = std::move(seq_rates);
  return policy;
}

ExitPolicy build_policy(const HeadBank& calib, const AllocationResult& allocation, const ScoreSpec& spec,
                        RateCorrection correction) {
  if (allocation.epsilons.size() != calib.num_heads()) {
    throw Error(ErrorCode::HeadCountMismatch, "allocation has " + std::to_string(allocation.epsilons.size()) +
                                                  " heads, bank has " + std::to_string(calib.num_heads()));
  }
  std::vector<std::future<ScoreCdf>> pending;
  pending.reserve(calib.num_heads());
  for (std::size_t l = 0; l < calib.num_heads(); ++l) {
    pending.push_back(std::async(std::launch::async, [&calib, &spec, l] { return build_cdf(calib, l, spec); }));
  }
  std::vector<ScoreCdf> cdfs;
  cdfs.reserve(calib.num_heads());
  for (auto& f : pending) cdfs.push_back(f.get());
  auto rates = sequential_rates(allocation.epsilons, calib.num_instances(), correction);
  return policy_from_rates(cdfs, std::move(rates), spec);
}

}  // namespace eero
