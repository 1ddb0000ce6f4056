#include "eero/inference.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "eero/scoring.hpp"

namespace eero {

void parallel_for_chunks(std::size_t n, unsigned workers, const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    fn(0, n);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        try {
          fn(begin, end);
        } catch (...) {
          const std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

ExitDecision route_instance(const ExitPolicy& policy, std::uint64_t instance,
                            const std::function<std::span<const double>(std::size_t)>& fetch_row) {
  const std::size_t m = policy.num_heads();
  for (std::size_t l = 0; l < m; ++l) {
    const auto scored = score_row(fetch_row(l), l, instance, policy.score);
    if (l + 1 == m || scored.score >= policy.thresholds[l]) return {l, scored.prediction};
  }
  return {};  // unreachable: m >= 1 and the last head always exits
}

BatchResult classify_batch(const HeadBank& batch, const ExitPolicy& policy,
                           std::optional<std::span<const std::size_t>> labels, const InferenceOptions& options) {
  const std::size_t m = batch.num_heads();
  if (policy.num_heads() != m || policy.seq_rates.size() != m) {
    throw Error(ErrorCode::HeadCountMismatch, "policy has " + std::to_string(policy.num_heads()) +
                                                  " heads, data has " + std::to_string(m));
  }
  const std::size_t t = batch.num_instances();
  if (labels && labels->size() != t) {
    throw Error(ErrorCode::LabelLengthMismatch, std::to_string(labels->size()) + " labels for " +
                                                    std::to_string(t) + " instances");
  }

  BatchResult result;
  result.exits.resize(t);
  result.predictions.resize(t);
  result.per_instance_cost.resize(t);

  parallel_for_chunks(t, options.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto decision = route_instance(policy, instance_key(options.split, i),
                                           [&](std::size_t l) { return batch.head(l).probs.row(i); });
      result.exits[i] = decision.head;
      result.predictions[i] = decision.prediction;
      result.per_instance_cost[i] = batch.head(decision.head).budget_gflops;
    }
  });

  std::vector<std::size_t> counts(m, 0);
  for (std::size_t e : result.exits) ++counts[e];
  result.exit_proportions.resize(m);
  for (std::size_t l = 0; l < m; ++l) {
    result.consumed_budget += static_cast<double>(counts[l]) * batch.head(l).budget_gflops;
    result.exit_proportions[l] = static_cast<double>(counts[l]) / static_cast<double>(t);
  }
  if (labels) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < t; ++i) correct += result.predictions[i] == (*labels)[i] ? 1 : 0;
    result.accuracy = static_cast<double>(correct) / static_cast<double>(t);
  }
  return result;
}

BudgetReport measure_budget(const BatchResult& result, const BudgetSpec& budget) noexcept {
  BudgetReport r;
  r.consumed = result.consumed_budget;
  r.allowed = budget.total_budget;
  r.utilization = r.allowed > 0.0 ? r.consumed / r.allowed : 0.0;
  r.within_budget = r.consumed <= r.allowed;
  return r;
}

}  // namespace eero
