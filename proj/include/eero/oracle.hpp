#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "eero/domain.hpp"
#include "eero/random.hpp"

namespace eero {

enum class OracleMode { AtMostBudget, ExactBudget };

/// Which head is right on which instance, plus head costs and the batch budget.
struct OracleInstance {
  std::size_t num_instances = 0;
  std::size_t num_heads = 0;
  std::vector<std::uint8_t> correct;  // row-major T x M, 1 = head correct
  std::vector<double> costs;
  double budget = 0.0;
  OracleMode mode = OracleMode::AtMostBudget;

  bool is_correct(std::size_t i, std::size_t l) const noexcept { return correct[i * num_heads + l] != 0; }
};

/// Correctness of each head's argmax against 0-based labels. By default rows
/// are not jittered; pass a ScoreSpec to use the same jittered predictions as
/// the exit policy.
OracleInstance make_oracle_instance(const HeadBank& bank, std::span<const std::size_t> labels, double budget,
                                    OracleMode mode = OracleMode::AtMostBudget,
                                    const std::optional<ScoreSpec>& jitter = std::nullopt, Split split = Split::Test);

struct OracleResult {
  std::vector<std::size_t> assignment;  // 0-based head per instance
  std::size_t num_correct = 0;
  double accuracy = 0.0;
  double cost = 0.0;
};

/// Cost grid: if every cost is a multiple of 10^-d for some d <= 6, the gcd of
/// the scaled costs; otherwise budget / 1e5.
double default_resolution(std::span<const double> costs, double budget);

/// Exact multiple-choice knapsack over integer cost units (costs rounded up to
/// the resolution, so results are feasible for the true budget). Ties go to
/// lower total cost, then lower head index.
///
/// Throws InfeasibleBudget (B < T * min cost, or no exact-budget assignment),
/// ResolutionTooCoarse, InvalidArgument when the DP table would be too large.
OracleResult oracle_exact(const OracleInstance& instance, std::optional<double> resolution = std::nullopt);

/// Upgrade-by-best-ratio heuristic in at-most-budget mode on the same cost
/// grid as oracle_exact. Never exceeds the budget.
OracleResult oracle_greedy(const OracleInstance& instance, std::optional<double> resolution = std::nullopt);

/// At-most-budget DP table built once and queried for many budgets. The
/// table depends only on correctness and unit costs.
class BudgetFrontier {
 public:
  BudgetFrontier(const OracleInstance& instance, double resolution);

  /// Same contract as oracle_exact in at-most-budget mode.
  OracleResult solve(double budget) const;

 private:
  const OracleInstance* instance_;
  double resolution_;
  std::vector<std::int64_t> units_;
  std::vector<std::int64_t> min_units_;  // min cost units for v correct, v = 0..T
  std::vector<std::uint8_t> choice_;     // (T) x (T + 1)
};

}  // namespace eero
