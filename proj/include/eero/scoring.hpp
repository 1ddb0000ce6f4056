#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "eero/domain.hpp"

namespace eero {

std::string_view to_string(ScoreKind kind) noexcept;
/// Accepts "max_prob", "breaking_ties", "neg_entropy".
std::optional<ScoreKind> parse_score_kind(std::string_view name) noexcept;

/// Adds u_k ~ U[0, jitter_u] to each probability; u_k is keyed by
/// (seed, head, instance, class) so repeated calls agree bit for bit.
std::vector<double> jitter_row(std::span<const double> probs, std::size_t head, std::uint64_t instance,
                               const ScoreSpec& spec);

/// Index of the largest entry; exact ties go to the lowest index.
std::size_t head_predict(std::span<const double> row) noexcept;

/// Confidence score of a (jittered) row; larger always means more confident.
///   max_prob:      largest entry
///   breaking_ties: largest minus second largest entry
///   neg_entropy:   sum q log q, entries clamped below at 1e-12
double head_score(std::span<const double> row, ScoreKind kind) noexcept;

struct ScoredRow {
  double score = 0.0;
  std::size_t prediction = 0;
};

/// Jitter, predict and score in one step.
ScoredRow score_row(std::span<const double> probs, std::size_t head, std::uint64_t instance, const ScoreSpec& spec);

}  // namespace eero
