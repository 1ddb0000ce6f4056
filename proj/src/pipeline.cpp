#include "eero/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "eero/inference.hpp"
#include "eero/oracle.hpp"
#include "eero/scoring.hpp"

namespace eero {

std::vector<double> resolve_risks(const Dataset& data) {
  const auto& reference = data.calib ? data.calib : data.test;
  if (reference && reference->bank.has_risks()) return reference->bank.risks();
  if (!data.train) throw Error(ErrorCode::MissingLabels, "risks are absent and there is no train split to compute them");
  return compute_risks(data.train->bank, data.train->labels);
}

CalibrationRecord calibrate(const HeadBank& calib, const BudgetSpec& budget, const CalibrateOptions& options) {
  budget.check_feasible(calib);
  const auto problem = AllocationProblem::from_bank(calib, budget, options.beta);
  CalibrationRecord record;
  record.budget = budget;
  record.beta = options.beta;
  record.risks = problem.risks();
  record.prior = problem.prior();
  record.allocation = solve_allocation(problem);
  record.policy = build_policy(calib, record.allocation, options.score, options.correction);
  return record;
}

std::vector<SweepRow> run_sweep(const HeadBank& calib, const HeadBank& test, std::span<const std::size_t> test_labels,
                                std::span<const double> budgets, const SweepOptions& options) {
  if (budgets.empty()) return {};
  const std::size_t m = test.num_heads();
  const std::size_t t = test.num_instances();
  if (calib.num_heads() != m) throw Error(ErrorCode::HeadCountMismatch, "calibration and test banks differ in heads");

  // Validate every budget up front so a bad entry fails before any work.
  for (double b : budgets) BudgetSpec::make(b, t).check_feasible(test);

  const double smallest = *std::min_element(budgets.begin(), budgets.end());
  const auto instance = make_oracle_instance(test, test_labels, smallest);
  const double resolution = options.resolution.value_or(default_resolution(instance.costs, smallest));
  const BudgetFrontier frontier(instance, resolution);

  std::vector<double> head_accuracy(m);
  for (std::size_t l = 0; l < m; ++l) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < t; ++i) correct += instance.is_correct(i, l) ? 1 : 0;
    head_accuracy[l] = static_cast<double>(correct) / static_cast<double>(t);
  }

  const std::size_t per_budget = m + 2;
  std::vector<SweepRow> rows(budgets.size() * per_budget);
  parallel_for_chunks(budgets.size(), options.jobs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      const double total = budgets[b];
      const auto spec = BudgetSpec::make(total, t);
      const auto record = calibrate(calib, spec, options.calibrate);
      const auto result = classify_batch(test, record.policy, test_labels);
      const auto oracle = frontier.solve(total);
      SweepRow* out = rows.data() + b * per_budget;
      out[0] = {total, result.accuracy, result.consumed_budget, result.consumed_budget <= total, "eero"};
      out[1] = {total, oracle.accuracy, oracle.cost, oracle.cost <= total, "oracle"};
      for (std::size_t l = 0; l < m; ++l) {
        const double cost = static_cast<double>(t) * test.head(l).budget_gflops;
        out[2 + l] = {total, head_accuracy[l], cost, cost <= total, "head_" + std::to_string(l + 1)};
      }
    }
  });
  return rows;
}

namespace {

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::InvalidArgument, "bad number '" + std::string(s) + "' in budget list");
  }
  return v;
}

}  // namespace

std::vector<double> parse_budget_list(std::string_view text) {
  std::vector<double> out;
  if (text.starts_with("linspace:")) {
    std::vector<std::string_view> parts;
    std::string_view rest = text.substr(9);
    for (std::size_t pos; (pos = rest.find(':')) != std::string_view::npos;) {
      parts.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    parts.push_back(rest);
    if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, "expected linspace:lo:hi:n");
    const double lo = parse_double(parts[0]);
    const double hi = parse_double(parts[1]);
    const double n = parse_double(parts[2]);
    if (!(n >= 1.0) || n != std::floor(n)) throw Error(ErrorCode::InvalidArgument, "linspace count must be a positive integer");
    const auto count = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    if (count > 1) out.back() = hi;
    return out;
  }
  std::string_view rest = text;
  while (true) {
    const std::size_t comma = rest.find(',');
    out.push_back(parse_double(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace eero
