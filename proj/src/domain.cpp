#include "eero/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace eero {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::TooFewHeads: return "TooFewHeads";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonIncreasingBudgets: return "NonIncreasingBudgets";
    case ErrorCode::RowNotNormalized: return "RowNotNormalized";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::MissingRisks: return "MissingRisks";
    case ErrorCode::EmptyCalibration: return "EmptyCalibration";
    case ErrorCode::NotOnSimplex: return "NotOnSimplex";
    case ErrorCode::InfeasibleBudget: return "InfeasibleBudget";
    case ErrorCode::EqualBudgets: return "EqualBudgets";
    case ErrorCode::BudgetBelowMinimum: return "BudgetBelowMinimum";
    case ErrorCode::HeadCountMismatch: return "HeadCountMismatch";
    case ErrorCode::LabelLengthMismatch: return "LabelLengthMismatch";
    case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

ProbMatrix::ProbMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::ShapeMismatch, "matrix data has " + std::to_string(data_.size()) +
                                              " entries, expected " + std::to_string(rows_ * cols_));
  }
}

namespace {

// Rows already within this distance of 1 are left untouched so that
// validating an already-validated bank is the identity.
constexpr double kExactSumSlack = 1e-12;

void check_and_normalize(HeadSlice& head, std::size_t l) {
  const auto where = [&](std::size_t i) {
    return "head " + std::to_string(l + 1) + ", row " + std::to_string(i + 1);
  };
  for (std::size_t i = 0; i < head.probs.rows(); ++i) {
    auto row = head.probs.row(i);
    double sum = 0.0;
    for (double p : row) {
      if (!std::isfinite(p) || p < 0.0) {
        throw Error(ErrorCode::RowNotNormalized, where(i) + ": entry " + std::to_string(p) + " is not a probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw Error(ErrorCode::RowNotNormalized, where(i) + ": row sums to " + std::to_string(sum));
    }
    if (std::abs(sum - 1.0) > kExactSumSlack) {
      for (double& p : row) p /= sum;
    }
  }
}

}  // namespace

HeadBank HeadBank::validate(std::vector<HeadSlice> heads) {
  if (heads.size() < 2) {
    throw Error(ErrorCode::TooFewHeads, "need at least 2 heads, got " + std::to_string(heads.size()));
  }
  const std::size_t rows = heads.front().probs.rows();
  const std::size_t cols = heads.front().probs.cols();
  if (rows == 0 || cols < 2) {
    throw Error(ErrorCode::ShapeMismatch, "need at least one instance and two classes");
  }
  for (std::size_t l = 0; l < heads.size(); ++l) {
    const auto& h = heads[l];
    if (h.probs.rows() != rows || h.probs.cols() != cols) {
      throw Error(ErrorCode::ShapeMismatch, "head " + std::to_string(l + 1) + " is " + std::to_string(h.probs.rows()) +
                                                "x" + std::to_string(h.probs.cols()) + ", expected " +
                                                std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  for (std::size_t l = 0; l < heads.size(); ++l) {
    const auto& h = heads[l];
    if (!(std::isfinite(h.budget_gflops) && h.budget_gflops > 0.0)) {
      throw Error(ErrorCode::InvalidValue, "head " + std::to_string(l + 1) + " budget must be positive");
    }
    if (h.risk && !(*h.risk >= 0.0 && *h.risk <= 1.0)) {
      throw Error(ErrorCode::InvalidValue, "head " + std::to_string(l + 1) + " risk must lie in [0, 1]");
    }
    if (l > 0 && !(h.budget_gflops > heads[l - 1].budget_gflops)) {
      throw Error(ErrorCode::NonIncreasingBudgets, "head " + std::to_string(l + 1) + " budget " +
                                                       std::to_string(h.budget_gflops) + " does not exceed head " +
                                                       std::to_string(l) + " budget " +
                                                       std::to_string(heads[l - 1].budget_gflops));
    }
  }
  for (std::size_t l = 0; l < heads.size(); ++l) check_and_normalize(heads[l], l);
  return HeadBank(std::move(heads));
}

std::vector<double> HeadBank::budgets() const {
  std::vector<double> out;
  out.reserve(heads_.size());
  for (const auto& h : heads_) out.push_back(h.budget_gflops);
  return out;
}

bool HeadBank::has_risks() const noexcept {
  return std::all_of(heads_.begin(), heads_.end(), [](const HeadSlice& h) { return h.risk.has_value(); });
}

std::vector<double> HeadBank::risks() const {
  std::vector<double> out;
  out.reserve(heads_.size());
  for (std::size_t l = 0; l < heads_.size(); ++l) {
    if (!heads_[l].risk) throw Error(ErrorCode::MissingRisks, "head " + std::to_string(l + 1) + " has no risk");
    out.push_back(*heads_[l].risk);
  }
  return out;
}

HeadBank HeadBank::with_risks(std::span<const double> risks) const {
  if (risks.size() != heads_.size()) {
    throw Error(ErrorCode::HeadCountMismatch, "got " + std::to_string(risks.size()) + " risks for " +
                                                  std::to_string(heads_.size()) + " heads");
  }
  auto heads = heads_;
  for (std::size_t l = 0; l < heads.size(); ++l) {
    if (!(risks[l] >= 0.0 && risks[l] <= 1.0)) {
      throw Error(ErrorCode::InvalidValue, "head " + std::to_string(l + 1) + " risk must lie in [0, 1]");
    }
    heads[l].risk = risks[l];
  }
  return HeadBank(std::move(heads));
}

BudgetSpec BudgetSpec::make(double total_budget, std::size_t batch_size) {
  if (!(std::isfinite(total_budget) && total_budget > 0.0)) {
    throw Error(ErrorCode::InvalidValue, "total budget must be positive");
  }
  if (batch_size == 0) throw Error(ErrorCode::InvalidValue, "batch size must be positive");
  return BudgetSpec{total_budget, batch_size};
}

void BudgetSpec::check_feasible(const HeadBank& bank) const {
  const double cheapest = bank.head(0).budget_gflops;
  const double minimum_total = cheapest * static_cast<double>(batch_size);
  if (total_budget < minimum_total * (1.0 - 1e-9)) {
    throw Error(ErrorCode::InfeasibleBudget, "budget " + std::to_string(total_budget) +
                                                 " is below T * min budget = " + std::to_string(minimum_total));
  }
}

}  // namespace eero
