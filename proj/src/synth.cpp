#include "eero/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

#include "eero/inference.hpp"
#include "eero/random.hpp"

namespace eero {

namespace {

enum Stream : std::uint64_t { kLabel = 1, kShared, kHeadNoise, kWrongClass, kLogitNoise };

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

void SynthSpec::validate() const {
  const auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidSpec, why); };
  if (num_classes < 2) fail("num_classes must be at least 2");
  const std::size_t m = head_accuracies.size();
  if (m < 2) fail("need at least 2 heads");
  if (head_budgets.size() != m) fail("head_budgets and head_accuracies differ in length");
  for (std::size_t l = 0; l < m; ++l) {
    if (!(head_accuracies[l] > 0.0 && head_accuracies[l] < 1.0)) fail("head accuracies must lie in (0, 1)");
    if (!(std::isfinite(head_budgets[l]) && head_budgets[l] > 0.0)) fail("head budgets must be positive");
    if (l > 0 && !(head_budgets[l] > head_budgets[l - 1])) fail("head budgets must strictly increase");
  }
  if (!(std::isfinite(confidence_sharpness) && confidence_sharpness > 0.0)) fail("confidence_sharpness must be positive");
  if (!(std::isfinite(logit_noise) && logit_noise >= 0.0)) fail("logit_noise must be non-negative");
  if (!(difficulty_correlation >= 0.0 && difficulty_correlation <= 1.0)) fail("difficulty_correlation must lie in [0, 1]");
  if (n_train == 0 || n_calib == 0 || n_test == 0) fail("split sizes must be positive");
}

SynthSpec default_synth_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.num_classes = 10;
  spec.head_accuracies = {0.45, 0.55, 0.62, 0.68, 0.72, 0.70, 0.78, 0.82};
  spec.head_budgets = {1, 2, 3, 4, 5, 6, 7, 8};
  return spec;
}

LabeledSplit generate_split(const SynthSpec& spec, std::uint64_t split_key, std::size_t n) {
  spec.validate();
  const std::size_t m = spec.head_accuracies.size();
  const std::size_t k = spec.num_classes;
  const double rho = spec.difficulty_correlation;
  const double own = std::sqrt(1.0 - rho * rho);

  std::vector<std::size_t> labels(n);
  std::vector<std::vector<double>> probs(m, std::vector<double>(n * k));
  // Every draw is keyed by (seed, split, instance, ...), so chunking does not
  // change the output.
  parallel_for_chunks(n, std::max(1u, std::thread::hardware_concurrency()), [&](std::size_t begin, std::size_t end) {
    std::vector<double> logits(k);
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint64_t base = hash_key({spec.seed, split_key, i});
      const std::size_t label = static_cast<std::size_t>(to_unit(hash_key({base, kLabel})) * static_cast<double>(k));
      labels[i] = label;
      const double shared = keyed_normal(hash_key({base, kShared}));
      for (std::size_t l = 0; l < m; ++l) {
        const double z = rho * shared + own * keyed_normal(hash_key({base, kHeadNoise, l}));
        const double difficulty = normal_cdf(z);
        std::size_t predicted = label;
        if (difficulty > spec.head_accuracies[l]) {
          const auto offset =
              1 + static_cast<std::size_t>(to_unit(hash_key({base, kWrongClass, l})) * static_cast<double>(k - 1));
          predicted = (label + offset) % k;
        }
        for (std::size_t c = 0; c < k; ++c) {
          logits[c] = spec.logit_noise * keyed_normal(hash_key({base, kLogitNoise, l, c}));
        }
        logits[predicted] += spec.confidence_sharpness * (1.0 - difficulty);
        // The predicted class must stay the argmax of the emitted row.
        const double top = *std::max_element(logits.begin(), logits.end());
        if (logits[predicted] < top) std::swap(logits[predicted], *std::max_element(logits.begin(), logits.end()));
        double sum = 0.0;
        double* row = probs[l].data() + i * k;
        for (std::size_t c = 0; c < k; ++c) {
          row[c] = std::exp(logits[c] - top);
          sum += row[c];
        }
        for (std::size_t c = 0; c < k; ++c) row[c] /= sum;
      }
    }
  });

  std::vector<HeadSlice> heads;
  heads.reserve(m);
  for (std::size_t l = 0; l < m; ++l) {
    heads.push_back(HeadSlice{ProbMatrix(n, k, std::move(probs[l])), spec.head_budgets[l], std::nullopt});
  }
  return LabeledSplit{HeadBank::validate(std::move(heads)), std::move(labels)};
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  return SynthData{generate_split(spec, static_cast<std::uint64_t>(Split::Train), spec.n_train),
                   generate_split(spec, static_cast<std::uint64_t>(Split::Calib), spec.n_calib),
                   generate_split(spec, static_cast<std::uint64_t>(Split::Test), spec.n_test)};
}

}  // namespace eero
