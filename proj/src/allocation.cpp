#include "eero/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>

namespace eero {

namespace {

constexpr double kBracketWidth = 1e-12;

double expected_budget(std::span<const double> eps, std::span<const double> budgets) {
  double total = 0.0;
  for (std::size_t l = 0; l < eps.size(); ++l) total += eps[l] * budgets[l];
  return total;
}

std::vector<double> normalize_log_weights(std::vector<double> log_w) {
  const double top = *std::max_element(log_w.begin(), log_w.end());
  double sum = 0.0;
  for (double& w : log_w) {
    w = std::exp(w - top);
    sum += w;
  }
  for (double& w : log_w) w /= sum;
  return log_w;
}

}  // namespace

AllocationProblem AllocationProblem::make(std::vector<double> risks, std::vector<double> budgets,
                                          std::vector<double> prior, double beta, double mean_budget) {
  const std::size_t m = risks.size();
  if (m == 0 || budgets.size() != m || prior.size() != m) {
    throw Error(ErrorCode::InvalidValue, "risks, budgets and prior must have the same non-zero length");
  }
  for (std::size_t l = 0; l < m; ++l) {
    if (!(risks[l] >= 0.0 && risks[l] <= 1.0)) throw Error(ErrorCode::InvalidValue, "risk outside [0, 1]");
    if (!(std::isfinite(budgets[l]) && budgets[l] > 0.0)) throw Error(ErrorCode::InvalidValue, "budget must be positive");
    if (l > 0 && !(budgets[l] > budgets[l - 1])) {
      throw Error(ErrorCode::NonIncreasingBudgets, "budgets must strictly increase");
    }
    if (!(prior[l] > 0.0)) throw Error(ErrorCode::InvalidValue, "prior must be strictly positive");
  }
  const double prior_sum = std::accumulate(prior.begin(), prior.end(), 0.0);
  if (std::abs(prior_sum - 1.0) > 1e-12) throw Error(ErrorCode::NotOnSimplex, "prior sums to " + std::to_string(prior_sum));
  if (!(std::isfinite(beta) && beta > 0.0)) throw Error(ErrorCode::InvalidValue, "beta must be positive");
  if (!(std::isfinite(mean_budget) && mean_budget > 0.0)) {
    throw Error(ErrorCode::InvalidValue, "mean budget must be positive");
  }
  if (mean_budget < budgets.front() * (1.0 - 1e-9)) {
    throw Error(ErrorCode::InfeasibleBudget, "mean budget " + std::to_string(mean_budget) +
                                                 " is below the cheapest head budget " + std::to_string(budgets.front()));
  }
  AllocationProblem p;
  p.risks_ = std::move(risks);
  p.budgets_ = std::move(budgets);
  p.prior_ = std::move(prior);
  p.beta_ = beta;
  p.mean_budget_ = mean_budget;
  return p;
}

AllocationProblem AllocationProblem::from_bank(const HeadBank& bank, const BudgetSpec& budget, double beta) {
  auto budgets = bank.budgets();
  auto prior = default_prior(budgets);
  return make(bank.risks(), std::move(budgets), std::move(prior), beta, budget.mean_budget());
}

double AllocationProblem::objective(std::span<const double> epsilons) const {
  double risk = 0.0;
  for (std::size_t l = 0; l < epsilons.size(); ++l) risk += epsilons[l] * risks_[l];
  return risk + beta_ * kl_divergence(epsilons, prior_);
}

std::vector<double> default_prior(std::span<const double> budgets) {
  std::vector<double> prior(budgets.size());
  double total = 0.0;
  for (std::size_t l = 0; l < budgets.size(); ++l) {
    prior[l] = 1.0 / budgets[l];
    total += prior[l];
  }
  for (double& p : prior) p /= total;
  return prior;
}

std::vector<double> gibbs_epsilons(const AllocationProblem& problem, double mu) {
  const auto& risks = problem.risks();
  const auto& budgets = problem.budgets();
  const auto& prior = problem.prior();
  std::vector<double> log_w(problem.size());
  for (std::size_t l = 0; l < log_w.size(); ++l) {
    log_w[l] = std::log(prior[l]) - (risks[l] + mu * budgets[l]) / problem.beta();
  }
  return normalize_log_weights(std::move(log_w));
}

double kl_divergence(std::span<const double> epsilons, std::span<const double> prior) {
  double kl = 0.0;
  for (std::size_t l = 0; l < epsilons.size(); ++l) {
    if (epsilons[l] > 0.0) kl += epsilons[l] * std::log(epsilons[l] / prior[l]);
  }
  return std::max(kl, 0.0);
}

AllocationResult solve_allocation(const AllocationProblem& problem) {
  const auto& budgets = problem.budgets();
  const double target = problem.mean_budget();

  const auto finish = [&](std::vector<double> eps, double mu) {
    AllocationResult r;
    r.expected_budget = expected_budget(eps, budgets);
    r.kl_to_prior = kl_divergence(eps, problem.prior());
    r.epsilons = std::move(eps);
    r.multiplier = mu;
    r.saturated = mu > 0.0;
    return r;
  };

  auto eps0 = gibbs_epsilons(problem, 0.0);
  if (expected_budget(eps0, budgets) <= target) return finish(std::move(eps0), 0.0);

  // Budgets strictly increase, so the cheapest head is unique and the
  // mu -> infinity limit is a point mass on it.
  if (target <= budgets.front() * (1.0 + 1e-9)) {
    std::vector<double> point(problem.size(), 0.0);
    point.front() = 1.0;
    return finish(std::move(point), std::numeric_limits<double>::infinity());
  }

  const auto excess = [&](double mu) { return expected_budget(gibbs_epsilons(problem, mu), budgets) - target; };

  double lo = 0.0;
  double hi = 1.0;
  while (excess(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw Error(ErrorCode::InfeasibleBudget, "failed to bracket the budget multiplier");
  }
  // Bisect down to the bracket width (or to adjacent doubles) and return the
  // upper end, where the budget holds. Stopping at the first |excess| below
  // 1e-10 * target would leave up to that much budget unspent.
  while (hi - lo > kBracketWidth * std::max(1.0, hi)) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (excess(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double mu = hi;
  return finish(gibbs_epsilons(problem, mu), mu);
}

double single_head_rate(double budget1, double budget2, double total_budget, std::size_t batch_size) {
  if (budget1 == budget2) throw Error(ErrorCode::EqualBudgets, "head budgets must differ");
  if (!(budget1 < budget2)) throw Error(ErrorCode::NonIncreasingBudgets, "first head must be cheaper");
  if (batch_size == 0) throw Error(ErrorCode::InvalidValue, "batch size must be positive");
  const double t = static_cast<double>(batch_size);
  if (total_budget < t * budget1) {
    throw Error(ErrorCode::BudgetBelowMinimum,
                "budget " + std::to_string(total_budget) + " below T * B1 = " + std::to_string(t * budget1));
  }
  if (total_budget == t * budget1) return 1.0;
  if (total_budget >= t * budget2) {
    if (total_budget > t * budget2) {
      std::cerr << "warning: budget exceeds T * B2; the early-exit rate is clamped to 0\n";
    }
    return 0.0;
  }
  const double eps = (total_budget / t - budget2) / (budget1 - budget2);
  return std::clamp(eps, 0.0, 1.0);
}

}  // namespace eero
