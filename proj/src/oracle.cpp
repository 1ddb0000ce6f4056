#include "eero/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include "eero/scoring.hpp"

namespace eero {

namespace {

constexpr std::int64_t kUnreachable = std::numeric_limits<std::int64_t>::max() / 4;
constexpr std::size_t kMaxTableCells = 500'000'000;
constexpr double kGridSlack = 1e-9;

void check_instance(const OracleInstance& inst) {
  if (inst.num_instances == 0 || inst.num_heads == 0) throw Error(ErrorCode::InvalidArgument, "empty oracle instance");
  if (inst.num_heads > 255) throw Error(ErrorCode::InvalidArgument, "at most 255 heads supported");
  if (inst.costs.size() != inst.num_heads || inst.correct.size() != inst.num_instances * inst.num_heads) {
    throw Error(ErrorCode::ShapeMismatch, "oracle instance dimensions disagree");
  }
  for (double c : inst.costs) {
    if (!(std::isfinite(c) && c > 0.0)) throw Error(ErrorCode::InvalidValue, "costs must be positive");
  }
  const double cheapest = *std::min_element(inst.costs.begin(), inst.costs.end());
  const double minimum = cheapest * static_cast<double>(inst.num_instances);
  if (!(inst.budget >= minimum * (1.0 - 1e-12))) {
    throw Error(ErrorCode::InfeasibleBudget,
                "budget " + std::to_string(inst.budget) + " is below T * min cost = " + std::to_string(minimum));
  }
}

std::vector<std::int64_t> to_units(std::span<const double> costs, double resolution) {
  if (!(std::isfinite(resolution) && resolution > 0.0)) throw Error(ErrorCode::InvalidArgument, "resolution must be positive");
  std::vector<std::int64_t> units(costs.size());
  for (std::size_t l = 0; l < costs.size(); ++l) {
    const double scaled = costs[l] / resolution;
    if (scaled > 1e12) throw Error(ErrorCode::InvalidArgument, "resolution too fine for the head costs");
    units[l] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(scaled - kGridSlack * std::max(1.0, scaled))));
  }
  return units;
}

std::int64_t capacity_units(double budget, double resolution) {
  const double scaled = budget / resolution;
  if (scaled > 1e15) throw Error(ErrorCode::InvalidArgument, "resolution too fine for the budget");
  return static_cast<std::int64_t>(std::floor(scaled + kGridSlack * std::max(1.0, scaled)));
}

void check_cheapest_fits(std::span<const std::int64_t> units, std::size_t t, std::int64_t capacity) {
  const std::int64_t cheapest = *std::min_element(units.begin(), units.end());
  if (cheapest * static_cast<std::int64_t>(t) > capacity) {
    throw Error(ErrorCode::ResolutionTooCoarse, "rounded costs make even the cheapest assignment exceed the budget");
  }
}

OracleResult summarize(const OracleInstance& inst, std::vector<std::size_t> assignment) {
  OracleResult r;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    r.num_correct += inst.is_correct(i, assignment[i]) ? 1 : 0;
    r.cost += inst.costs[assignment[i]];
  }
  r.accuracy = static_cast<double>(r.num_correct) / static_cast<double>(inst.num_instances);
  r.assignment = std::move(assignment);
  return r;
}

OracleResult solve_exact_budget(const OracleInstance& inst, double resolution) {
  const auto units = to_units(inst.costs, resolution);
  const double scaled_budget = inst.budget / resolution;
  if (std::abs(scaled_budget - std::round(scaled_budget)) > kGridSlack * std::max(1.0, scaled_budget)) {
    throw Error(ErrorCode::InfeasibleBudget, "budget is not a multiple of the cost resolution");
  }
  const std::int64_t capacity = capacity_units(inst.budget, resolution);
  check_cheapest_fits(units, inst.num_instances, capacity);

  const std::size_t t = inst.num_instances;
  const std::size_t m = inst.num_heads;
  const std::int64_t base = *std::min_element(units.begin(), units.end());
  const auto extra_capacity = static_cast<std::size_t>(capacity - base * static_cast<std::int64_t>(t));
  const std::size_t width = extra_capacity + 1;
  if (t * width > kMaxTableCells) {
    throw Error(ErrorCode::InvalidArgument, "exact-budget table too large; use a coarser resolution");
  }

  // best[w] = max #correct with extra cost exactly w units above T * cheapest.
  std::vector<int> best(width, -1);
  std::vector<int> next(width);
  std::vector<std::uint8_t> choice(t * width, 0);
  best[0] = 0;
  for (std::size_t i = 0; i < t; ++i) {
    std::fill(next.begin(), next.end(), -1);
    for (std::size_t l = 0; l < m; ++l) {
      const auto extra = static_cast<std::size_t>(units[l] - base);
      const int gain = inst.is_correct(i, l) ? 1 : 0;
      for (std::size_t w = extra; w < width; ++w) {
        if (best[w - extra] < 0) continue;
        const int value = best[w - extra] + gain;
        if (value > next[w]) {
          next[w] = value;
          choice[i * width + w] = static_cast<std::uint8_t>(l);
        }
      }
    }
    best.swap(next);
  }
  if (best[extra_capacity] < 0) {
    throw Error(ErrorCode::InfeasibleBudget, "no assignment consumes exactly the budget");
  }
  std::vector<std::size_t> assignment(t);
  std::size_t w = extra_capacity;
  for (std::size_t i = t; i-- > 0;) {
    const std::size_t l = choice[i * width + w];
    assignment[i] = l;
    w -= static_cast<std::size_t>(units[l] - base);
  }
  return summarize(inst, std::move(assignment));
}

}  // namespace

OracleInstance make_oracle_instance(const HeadBank& bank, std::span<const std::size_t> labels, double budget,
                                    OracleMode mode, const std::optional<ScoreSpec>& jitter, Split split) {
  const std::size_t t = bank.num_instances();
  const std::size_t m = bank.num_heads();
  if (labels.size() != t) {
    throw Error(ErrorCode::LabelLengthMismatch, std::to_string(labels.size()) + " labels for " + std::to_string(t) +
                                                    " instances");
  }
  OracleInstance inst;
  inst.num_instances = t;
  inst.num_heads = m;
  inst.correct.resize(t * m);
  inst.costs = bank.budgets();
  inst.budget = budget;
  inst.mode = mode;
  for (std::size_t l = 0; l < m; ++l) {
    const auto& probs = bank.head(l).probs;
    for (std::size_t i = 0; i < t; ++i) {
      const std::size_t predicted = jitter ? score_row(probs.row(i), l, instance_key(split, i), *jitter).prediction
                                           : head_predict(probs.row(i));
      inst.correct[i * m + l] = predicted == labels[i] ? 1 : 0;
    }
  }
  return inst;
}

double default_resolution(std::span<const double> costs, double budget) {
  for (int digits = 0; digits <= 6; ++digits) {
    const double scale = std::pow(10.0, digits);
    std::int64_t g = 0;
    bool on_grid = true;
    for (double c : costs) {
      const double scaled = c * scale;
      const double rounded = std::round(scaled);
      if (rounded < 1.0 || std::abs(scaled - rounded) > kGridSlack * std::max(1.0, scaled)) {
        on_grid = false;
        break;
      }
      g = std::gcd(g, static_cast<std::int64_t>(rounded));
    }
    if (on_grid && g > 0) return static_cast<double>(g) / scale;
  }
  return budget / 1e5;
}

BudgetFrontier::BudgetFrontier(const OracleInstance& instance, double resolution)
    : instance_(&instance), resolution_(resolution), units_(to_units(instance.costs, resolution)) {
  const std::size_t t = instance.num_instances;
  const std::size_t m = instance.num_heads;
  if (t == 0 || m == 0 || m > 255) throw Error(ErrorCode::InvalidArgument, "bad oracle dimensions");
  if (t * (t + 1) > kMaxTableCells) throw Error(ErrorCode::InvalidArgument, "batch too large for the exact oracle");

  // min_units[v] = least total cost reaching exactly v correct predictions.
  const std::size_t width = t + 1;
  min_units_.assign(width, kUnreachable);
  std::vector<std::int64_t> next(width);
  choice_.assign(t * width, 0);
  min_units_[0] = 0;
  for (std::size_t i = 0; i < t; ++i) {
    std::fill(next.begin(), next.end(), kUnreachable);
    for (std::size_t l = 0; l < m; ++l) {
      const std::size_t gain = instance.is_correct(i, l) ? 1 : 0;
      for (std::size_t v = gain; v <= i + 1; ++v) {
        const std::int64_t prev = min_units_[v - gain];
        if (prev >= kUnreachable) continue;
        const std::int64_t candidate = prev + units_[l];
        if (candidate < next[v]) {
          next[v] = candidate;
          choice_[i * width + v] = static_cast<std::uint8_t>(l);
        }
      }
    }
    min_units_.swap(next);
  }
}

OracleResult BudgetFrontier::solve(double budget) const {
  OracleInstance probe = *instance_;
  probe.budget = budget;
  check_instance(probe);
  const std::int64_t capacity = capacity_units(budget, resolution_);
  check_cheapest_fits(units_, instance_->num_instances, capacity);

  const std::size_t t = instance_->num_instances;
  const std::size_t width = t + 1;
  std::size_t v = t;
  while (min_units_[v] > capacity) --v;  // v = 0 always fits after the check above

  std::vector<std::size_t> assignment(t);
  for (std::size_t i = t; i-- > 0;) {
    const std::size_t l = choice_[i * width + v];
    assignment[i] = l;
    v -= instance_->is_correct(i, l) ? 1 : 0;
  }
  return summarize(*instance_, std::move(assignment));
}

OracleResult oracle_exact(const OracleInstance& instance, std::optional<double> resolution) {
  check_instance(instance);
  const double res = resolution.value_or(default_resolution(instance.costs, instance.budget));
  if (instance.mode == OracleMode::ExactBudget) return solve_exact_budget(instance, res);
  return BudgetFrontier(instance, res).solve(instance.budget);
}

OracleResult oracle_greedy(const OracleInstance& instance, std::optional<double> resolution) {
  check_instance(instance);
  const double res = resolution.value_or(default_resolution(instance.costs, instance.budget));
  const auto units = to_units(instance.costs, res);
  const std::int64_t capacity = capacity_units(instance.budget, res);
  check_cheapest_fits(units, instance.num_instances, capacity);

  const std::size_t t = instance.num_instances;
  const std::size_t m = instance.num_heads;
  const std::size_t start = static_cast<std::size_t>(std::min_element(units.begin(), units.end()) - units.begin());
  std::vector<std::size_t> assignment(t, start);
  std::int64_t remaining = capacity - units[start] * static_cast<std::int64_t>(t);

  // Each upgrade gains exactly one correct prediction, so the best
  // gain-per-cost upgrade of an instance is its cheapest correct head.
  std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> upgrades;
  for (std::size_t i = 0; i < t; ++i) {
    if (instance.is_correct(i, start)) continue;
    std::optional<std::size_t> target;
    for (std::size_t l = 0; l < m; ++l) {
      if (instance.is_correct(i, l) && (!target || units[l] < units[*target])) target = l;
    }
    if (target) upgrades.emplace_back(units[*target] - units[start], i, *target);
  }
  std::sort(upgrades.begin(), upgrades.end());
  for (const auto& [delta, i, l] : upgrades) {
    if (delta > remaining) break;
    assignment[i] = l;
    remaining -= delta;
  }
  return summarize(instance, std::move(assignment));
}

}  // namespace eero
