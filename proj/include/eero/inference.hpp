#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "eero/domain.hpp"
#include "eero/random.hpp"

namespace eero {

struct ExitDecision {
  std::size_t head = 0;
  std::size_t prediction = 0;
};

/// Lazy early-exit loop for a single instance: asks `fetch_row(l)` for head
/// l's probabilities only when every earlier head rejected the instance.
ExitDecision route_instance(const ExitPolicy& policy, std::uint64_t instance,
                            const std::function<std::span<const double>(std::size_t)>& fetch_row);

struct InferenceOptions {
  unsigned workers = 1;
  Split split = Split::Test;
};

/// Runs the calibrated policy over every row of `batch`. Labels are 0-based
/// classes; accuracy is absent when no labels are given. Throws
/// HeadCountMismatch and LabelLengthMismatch.
BatchResult classify_batch(const HeadBank& batch, const ExitPolicy& policy,
                           std::optional<std::span<const std::size_t>> labels = std::nullopt,
                           const InferenceOptions& options = {});

struct BudgetReport {
  double consumed = 0.0;
  double allowed = 0.0;
  double utilization = 0.0;
  bool within_budget = false;
};

BudgetReport measure_budget(const BatchResult& result, const BudgetSpec& budget) noexcept;

/// Shared by every parallel loop in the library: calls fn(begin, end) over
/// contiguous chunks of [0, n) on up to `workers` threads. The first
/// exception thrown by a chunk is rethrown after all threads join.
void parallel_for_chunks(std::size_t n, unsigned workers, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace eero
