#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "eero/domain.hpp"
#include "eero/random.hpp"

namespace eero {

/// Empirical CDF of one head's jittered scores on the calibration sample.
class ScoreCdf {
 public:
  /// Throws EmptyCalibration when `scores` is empty.
  ScoreCdf(std::vector<double> scores, std::size_t head);

  std::size_t head() const noexcept { return head_; }
  std::size_t size() const noexcept { return sorted_.size(); }
  const std::vector<double>& sorted_scores() const noexcept { return sorted_; }

  /// #{s_i <= t} / N.
  double operator()(double t) const noexcept;

  /// Smallest sample score t with (*this)(t) >= level, or -inf when level <= 0.
  /// For any x: x >= quantile_threshold(level) <=> (*this)(x) >= level.
  double quantile_threshold(double level) const noexcept;

 private:
  std::vector<double> sorted_;
  std::size_t head_;
};

/// Scores of head `head` on every row of `bank`, keyed as instances of `split`.
ScoreCdf build_cdf(const HeadBank& bank, std::size_t head, const ScoreSpec& spec, Split split = Split::Calib);

inline double cdf_eval(const ScoreCdf& cdf, double t) noexcept { return cdf(t); }

enum class RateCorrection {
  None,          // the N -> infinity limit: plain cumulative sums
  Proportional,  // eps_seq * (1 + 1/sqrt(N)), clamped to 1
};

/// Cumulative classification rates with the finite-sample correction; the
/// last entry is always exactly 1. Throws NotOnSimplex.
std::vector<double> sequential_rates(std::span<const double> epsilons, std::size_t calibration_size,
                                     RateCorrection correction = RateCorrection::Proportional);

/// Calibrates thresholds on every row of `calib` (one CDF per head, all on
/// the same sample).
ExitPolicy build_policy(const HeadBank& calib, const AllocationResult& allocation, const ScoreSpec& spec,
                        RateCorrection correction = RateCorrection::Proportional);

/// Thresholds for given sequential rates against prebuilt CDFs.
ExitPolicy policy_from_rates(std::span<const ScoreCdf> cdfs, std::vector<double> seq_rates, const ScoreSpec& spec);

}  // namespace eero
