#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "eero/domain.hpp"

namespace eero {

/// Parameters of the synthetic multi-head generator.
///
/// Each instance gets a uniform label and, per head, a difficulty d_l that is
/// uniform on [0,1] marginally but correlated across heads through a shared
/// Gaussian factor. Head l is right iff d_l <= head_accuracies[l]; its
/// probability row is softmax(sharpness * (1 - d_l) * onehot(pred) + noise).
struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t num_classes = 10;
  std::vector<double> head_accuracies;
  std::vector<double> head_budgets;
  double confidence_sharpness = 6.0;
  double logit_noise = 0.5;
  double difficulty_correlation = 0.8;  // in [0, 1]; 1 = all heads share d
  std::size_t n_train = 10000;
  std::size_t n_calib = 1000;
  std::size_t n_test = 5000;

  /// Throws InvalidSpec.
  void validate() const;
};

/// Eight heads, ten classes, N_calib = 1000, T = 5000.
SynthSpec default_synth_spec(std::uint64_t seed = 0);

struct LabeledSplit {
  HeadBank bank;
  std::vector<std::size_t> labels;  // 0-based
};

struct SynthData {
  LabeledSplit train;
  LabeledSplit calib;
  LabeledSplit test;
};

SynthData generate(const SynthSpec& spec);

/// One split of `n` rows keyed by `split`; used directly by Monte Carlo tests
/// that need many fresh samples.
LabeledSplit generate_split(const SynthSpec& spec, std::uint64_t split_key, std::size_t n);

}  // namespace eero
