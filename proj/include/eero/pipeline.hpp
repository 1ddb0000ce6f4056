#pragma once

#include <optional>
#include <span>
#include <vector>

#include "eero/allocation.hpp"
#include "eero/calibration.hpp"
#include "eero/io.hpp"

namespace eero {

struct CalibrateOptions {
  double beta = kDefaultBeta;
  ScoreSpec score;
  RateCorrection correction = RateCorrection::Proportional;
};

/// Risks from the manifest when every head has one, otherwise the empirical
/// risk on the labeled train split.
std::vector<double> resolve_risks(const Dataset& data);

/// Prior, allocation, sequential rates and thresholds for one budget.
/// `calib` must carry risks.
CalibrationRecord calibrate(const HeadBank& calib, const BudgetSpec& budget, const CalibrateOptions& options = {});

struct SweepOptions {
  CalibrateOptions calibrate;
  unsigned jobs = 1;
  std::optional<double> resolution;
};

/// For every budget: calibrate, run the policy on `test`, solve the oracle,
/// and report each head used alone. Rows come out grouped by budget in input
/// order as eero, oracle, head_1..head_M.
std::vector<SweepRow> run_sweep(const HeadBank& calib, const HeadBank& test, std::span<const std::size_t> test_labels,
                                 std::span<const double> budgets, const SweepOptions& options = {});

/// Parses "a,b,c" or "linspace:lo:hi:n". Throws InvalidArgument.
std::vector<double> parse_budget_list(std::string_view text);

}  // namespace eero
