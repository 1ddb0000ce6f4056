#pragma once

#include <span>
#include <vector>

#include "eero/domain.hpp"

namespace eero {

inline constexpr double kDefaultBeta = 0.1;

/// KL-regularized risk minimization over the simplex under an average
/// budget constraint sum_l eps_l * budget_l <= mean_budget.
class AllocationProblem {
 public:
  /// Throws InvalidValue for risks outside [0,1], non-positive or non-increasing
  /// budgets, a prior that is not a positive simplex vector, or beta <= 0;
  /// InfeasibleBudget when mean_budget is below the cheapest head.
  static AllocationProblem make(std::vector<double> risks, std::vector<double> budgets, std::vector<double> prior,
                                double beta, double mean_budget);

  /// Risks and budgets from a bank (risks must be present), inverse-budget prior.
  static AllocationProblem from_bank(const HeadBank& bank, const BudgetSpec& budget, double beta = kDefaultBeta);

  std::size_t size() const noexcept { return risks_.size(); }
  const std::vector<double>& risks() const noexcept { return risks_; }
  const std::vector<double>& budgets() const noexcept { return budgets_; }
  const std::vector<double>& prior() const noexcept { return prior_; }
  double beta() const noexcept { return beta_; }
  double mean_budget() const noexcept { return mean_budget_; }

  /// sum eps R + beta * KL(eps || prior)
  double objective(std::span<const double> epsilons) const;

 private:
  AllocationProblem() = default;
  std::vector<double> risks_;
  std::vector<double> budgets_;
  std::vector<double> prior_;
  double beta_ = kDefaultBeta;
  double mean_budget_ = 0.0;
};

/// pi_l = (1/B_l) / sum_j (1/B_j).
std::vector<double> default_prior(std::span<const double> budgets);

/// eps_l proportional to pi_l exp(-(R_l + mu B_l) / beta), normalized in log space.
std::vector<double> gibbs_epsilons(const AllocationProblem& problem, double mu);

/// sum_l eps_l log(eps_l / pi_l) with 0 log 0 = 0.
double kl_divergence(std::span<const double> epsilons, std::span<const double> prior);

/// Solves for eps and the budget multiplier mu >= 0 by bisection on the
/// (non-increasing) expected budget. When the mean budget equals the cheapest
/// head budget the point-mass limit is returned with multiplier = +inf.
AllocationResult solve_allocation(const AllocationProblem& problem);

/// Closed form for one auxiliary head plus the final head:
/// eps = (B/T - B2) / (B1 - B2), clamped to [0, 1].
/// Throws EqualBudgets when B1 == B2 and BudgetBelowMinimum when B < T * B1.
double single_head_rate(double budget1, double budget2, double total_budget, std::size_t batch_size);

}  // namespace eero
