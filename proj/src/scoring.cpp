#include "eero/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eero/random.hpp"

namespace eero {

std::string_view to_string(ScoreKind kind) noexcept {
  switch (kind) {
    case ScoreKind::MaxProb: return "max_prob";
    case ScoreKind::BreakingTies: return "breaking_ties";
    case ScoreKind::NegEntropy: return "neg_entropy";
  }
  return "breaking_ties";
}

std::optional<ScoreKind> parse_score_kind(std::string_view name) noexcept {
  if (name == "max_prob") return ScoreKind::MaxProb;
  if (name == "breaking_ties") return ScoreKind::BreakingTies;
  if (name == "neg_entropy") return ScoreKind::NegEntropy;
  return std::nullopt;
}

std::vector<double> jitter_row(std::span<const double> probs, std::size_t head, std::uint64_t instance,
                               const ScoreSpec& spec) {
  std::vector<double> out(probs.begin(), probs.end());
  if (spec.jitter_u == 0.0) return out;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] += spec.jitter_u * keyed_uniform({spec.seed, head, instance, k});
  }
  return out;
}

std::size_t head_predict(std::span<const double> row) noexcept {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

double head_score(std::span<const double> row, ScoreKind kind) noexcept {
  switch (kind) {
    case ScoreKind::MaxProb:
      return *std::max_element(row.begin(), row.end());
    case ScoreKind::BreakingTies: {
      double first = -std::numeric_limits<double>::infinity();
      double second = first;
      for (double q : row) {
        if (q > first) {
          second = first;
          first = q;
        } else if (q > second) {
          second = q;
        }
      }
      return first - second;
    }
    case ScoreKind::NegEntropy: {
      double total = 0.0;
      for (double q : row) {
        const double c = std::max(q, 1e-12);
        total += c * std::log(c);
      }
      return total;
    }
  }
  return 0.0;
}

ScoredRow score_row(std::span<const double> probs, std::size_t head, std::uint64_t instance, const ScoreSpec& spec) {
  const auto jittered = jitter_row(probs, head, instance, spec);
  return {head_score(jittered, spec.kind), head_predict(jittered)};
}

}  // namespace eero
