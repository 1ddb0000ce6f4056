#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "eero/domain.hpp"
#include "eero/inference.hpp"
#include "eero/oracle.hpp"
#include "eero/random.hpp"
#include "eero/synth.hpp"

namespace eero {

using Json = nlohmann::ordered_json;

/// One split of a dataset on disk. Labels are 0-based in memory and 1-based
/// in files.
struct SplitData {
  HeadBank bank;
  std::vector<std::int64_t> instance_ids;
  std::optional<std::vector<std::size_t>> labels;
};

struct Dataset {
  std::size_t num_classes = 0;
  std::vector<double> budgets;
  std::optional<SplitData> train;
  std::optional<SplitData> calib;
  std::optional<SplitData> test;

  const std::optional<SplitData>& split(Split s) const noexcept;
  /// Throws InvalidArgument naming the missing split.
  const SplitData& require(Split s) const;
};

std::string_view split_name(Split s) noexcept;

/// Loads `manifest.json` (or `<dir>/manifest.json` when given a directory).
///
/// Manifest layout:
///   { "num_classes": K,
///     "heads": [ { "budget_gflops": b, "risk": r (optional),
///                  "probs_csv": { "train": path, "calib": path, "test": path } } ],
///     "labels_csv": { "train": path, "test": path } }
/// Paths are relative to the manifest. Any split may be omitted but every
/// head must list the same splits. Files ending in .gz are gunzipped.
///
/// Throws FileNotFound, ParseError (with file, row and column) and the
/// domain validation errors.
Dataset load_manifest(const std::filesystem::path& path);

struct ProbsCsv {
  std::vector<std::int64_t> instance_ids;
  ProbMatrix probs;
};

/// `instance_id,p_1,...,p_K` with strictly increasing ids; LF or CRLF.
ProbsCsv read_probs_csv(const std::filesystem::path& path, std::size_t num_classes);

/// `instance_id,label` with 1-based labels; returned labels are 0-based.
std::vector<std::size_t> read_labels_csv(const std::filesystem::path& path, std::size_t num_classes,
                                         std::span<const std::int64_t> expected_ids);

/// Per-head empirical 0-1 risk of the unjittered argmax. Throws MissingLabels
/// when `labels` is absent and LabelLengthMismatch on length disagreement.
std::vector<double> compute_risks(const HeadBank& bank, const std::optional<std::vector<std::size_t>>& labels);

/// Writes manifest.json plus per-split CSVs for a generated dataset.
void write_dataset(const std::filesystem::path& dir, const SynthData& data);

/// Writes via a temporary file and rename. Throws IoError.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

/// Reads a whole file, gunzipping `.gz` files. Throws FileNotFound / IoError.
std::string read_text(const std::filesystem::path& path);

/// %.17g formatting.
std::string format_double(double value);

// JSON documents. Infinite multipliers and -inf thresholds are written as null.

Json to_json(const AllocationResult& r);
AllocationResult allocation_from_json(const Json& j);

Json to_json(const ExitPolicy& p);
ExitPolicy policy_from_json(const Json& j);

Json to_json(const BudgetSpec& b);
BudgetSpec budget_from_json(const Json& j);

/// Field-by-field fill from JSON over `default_synth_spec()`; unknown keys
/// and wrong types throw InvalidSpec.
SynthSpec synth_spec_from_json(const Json& j);
Json to_json(const SynthSpec& s);

/// Output of the calibrate step: everything needed to run inference later.
struct CalibrationRecord {
  BudgetSpec budget;
  double beta = 0.0;
  std::vector<double> risks;
  std::vector<double> prior;
  AllocationResult allocation;
  ExitPolicy policy;
};

Json to_json(const CalibrationRecord& r);
CalibrationRecord calibration_from_json(const Json& j);

/// Summary schema shared by policy runs and the oracle:
///   oracle (bool), num_instances, num_heads, consumed_budget,
///   allowed_budget|null, utilization|null, within_budget|null,
///   accuracy|null, exit_proportions[M]
Json summary_json(const BatchResult& result, const std::optional<BudgetReport>& report);
Json summary_json(const OracleResult& result, std::size_t num_heads, double budget);

/// Throws ParseError describing the first violation of the summary schema.
void validate_summary_json(const Json& j);

/// instance_id,exit_head,prediction,cost,correct (1-based heads and classes;
/// `correct` is empty when labels are absent).
std::string per_instance_csv(const BatchResult& result, std::span<const std::int64_t> instance_ids,
                             const std::optional<std::vector<std::size_t>>& labels);

struct SweepRow {
  double budget = 0.0;
  std::optional<double> accuracy;
  double consumed = 0.0;
  bool within_budget = false;
  std::string source;  // eero, oracle, head_<l>
};

inline constexpr std::string_view kSweepHeader = "budget,accuracy,consumed,within_budget,source";

std::string sweep_csv(std::span<const SweepRow> rows);

void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

}  // namespace eero
