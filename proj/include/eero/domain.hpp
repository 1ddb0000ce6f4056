#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "eero/error.hpp"

namespace eero {

/// Dense row-major matrix of per-class probabilities (rows = instances).
class ProbMatrix {
 public:
  ProbMatrix() = default;
  ProbMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  ProbMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }

  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const ProbMatrix&, const ProbMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// One exit of the network: its probability estimates on a split, the
/// cumulative GFlops needed to infer one instance through this exit, and its
/// empirical 0-1 risk when known.
struct HeadSlice {
  ProbMatrix probs;
  double budget_gflops = 0.0;
  std::optional<double> risk;

  friend bool operator==(const HeadSlice&, const HeadSlice&) = default;
};

/// Validated, immutable set of M >= 2 heads over the same instances.
///
/// Invariants: all heads share K and the row count; budgets strictly increase
/// with the head index; every row is finite, non-negative and sums to one.
class HeadBank {
 public:
  /// Validates and renormalizes. Throws Error with one of TooFewHeads,
  /// ShapeMismatch, NonIncreasingBudgets, RowNotNormalized, InvalidValue.
  static HeadBank validate(std::vector<HeadSlice> heads);

  std::size_t num_heads() const noexcept { return heads_.size(); }
  std::size_t num_classes() const noexcept { return heads_.front().probs.cols(); }
  std::size_t num_instances() const noexcept { return heads_.front().probs.rows(); }

  const HeadSlice& head(std::size_t l) const { return heads_.at(l); }
  const std::vector<HeadSlice>& heads() const noexcept { return heads_; }

  std::vector<double> budgets() const;
  bool has_risks() const noexcept;
  /// Throws MissingRisks when any head lacks a risk.
  std::vector<double> risks() const;

  /// Same probabilities with the given risks attached.
  HeadBank with_risks(std::span<const double> risks) const;

  friend bool operator==(const HeadBank&, const HeadBank&) = default;

 private:
  explicit HeadBank(std::vector<HeadSlice> heads) : heads_(std::move(heads)) {}
  std::vector<HeadSlice> heads_;
};

inline constexpr double kRowSumTolerance = 1e-6;

/// Total budget B for a batch of T instances.
struct BudgetSpec {
  double total_budget = 0.0;
  std::size_t batch_size = 0;

  double mean_budget() const noexcept { return total_budget / static_cast<double>(batch_size); }

  /// Throws InvalidValue for non-positive B or T == 0.
  static BudgetSpec make(double total_budget, std::size_t batch_size);

  /// Throws InfeasibleBudget when B/T is below the cheapest head.
  void check_feasible(const HeadBank& bank) const;
};

struct AllocationResult {
  std::vector<double> epsilons;
  double multiplier = 0.0;  // +inf for the degenerate point-mass solution
  double expected_budget = 0.0;
  double kl_to_prior = 0.0;
  bool saturated = false;

  friend bool operator==(const AllocationResult&, const AllocationResult&) = default;
};

enum class ScoreKind { MaxProb, BreakingTies, NegEntropy };

inline constexpr double kDefaultJitter = 1e-5;

/// How confidence scores are computed: score kind plus the uniform [0, u]
/// jitter added to each probability before scoring.
struct ScoreSpec {
  ScoreKind kind = ScoreKind::BreakingTies;
  double jitter_u = kDefaultJitter;
  std::uint64_t seed = 0;

  friend bool operator==(const ScoreSpec&, const ScoreSpec&) = default;
};

/// Calibrated exit rule: head l classifies an instance when its score is at
/// least thresholds[l]. The final head always classifies.
struct ExitPolicy {
  ScoreSpec score;
  std::vector<double> seq_rates;
  std::vector<double> thresholds;  // -inf when seq_rates[l] == 1
  std::size_t calibration_size = 0;

  std::size_t num_heads() const noexcept { return thresholds.size(); }

  friend bool operator==(const ExitPolicy&, const ExitPolicy&) = default;
};

struct BatchResult {
  std::vector<std::size_t> exits;        // 0-based head index per instance
  std::vector<std::size_t> predictions;  // 0-based class index per instance
  std::vector<double> per_instance_cost;
  double consumed_budget = 0.0;
  std::optional<double> accuracy;
  std::vector<double> exit_proportions;

  std::size_t batch_size() const noexcept { return exits.size(); }
};

}  // namespace eero
