#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "eero/allocation.hpp"
#include "eero/calibration.hpp"
#include "eero/inference.hpp"
#include "eero/io.hpp"
#include "eero/oracle.hpp"
#include "eero/pipeline.hpp"
#include "eero/scoring.hpp"
#include "eero/synth.hpp"

namespace {

using namespace eero;

// Stable exit codes.
constexpr int kOk = 0;
constexpr int kInvalidInput = 2;
constexpr int kIoFailure = 3;
constexpr int kInfeasible = 4;
constexpr int kMismatch = 5;
constexpr int kResolution = 6;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound:
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
      return kIoFailure;
    case ErrorCode::InfeasibleBudget:
    case ErrorCode::BudgetBelowMinimum:
      return kInfeasible;
    case ErrorCode::HeadCountMismatch:
    case ErrorCode::LabelLengthMismatch:
      return kMismatch;
    case ErrorCode::ResolutionTooCoarse:
      return kResolution;
    default:
      return kInvalidInput;
  }
}

struct ScoreFlags {
  std::string kind = "breaking_ties";
  double jitter = kDefaultJitter;
  std::uint64_t seed = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--score", kind, "Confidence score: breaking_ties, max_prob or neg_entropy")
        ->check(CLI::IsMember({"breaking_ties", "max_prob", "neg_entropy"}))
        ->capture_default_str();
    cmd->add_option("--jitter", jitter, "Upper end u of the uniform jitter added to probabilities")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Seed of the jitter stream (falls back to $EERO_SEED)")
        ->envname("EERO_SEED")
        ->capture_default_str();
  }

  ScoreSpec spec() const { return ScoreSpec{*parse_score_kind(kind), jitter, seed}; }
};

HeadBank calib_with_risks(const Dataset& data) {
  return data.require(Split::Calib).bank.with_risks(resolve_risks(data));
}

void print_vector(const char* label, const std::vector<double>& v) {
  std::printf("%s", label);
  for (double x : v) std::printf(" %.4f", x);
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted early-exit classification with a reject option"};
  app.require_subcommand(1);

  // synth
  std::string synth_spec_path;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-head dataset (manifest + CSVs)");
  synth->add_option("--spec", synth_spec_path, "Synth spec JSON file")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // calibrate
  std::string cal_data;
  double cal_budget = 0.0;
  std::optional<std::size_t> cal_batch;
  double cal_beta = kDefaultBeta;
  std::string cal_correction = "proportional";
  std::string cal_out;
  ScoreFlags cal_score;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Allocate exit rates for a budget and calibrate thresholds");
  calibrate_cmd->add_option("--data", cal_data, "Dataset directory or manifest.json")->required();
  calibrate_cmd->add_option("--budget", cal_budget, "Total budget B in GFlops for the batch")->required();
  calibrate_cmd->add_option("--batch-size", cal_batch, "Batch size T (default: size of the test split)");
  calibrate_cmd->add_option("--beta", cal_beta, "Temperature of the exponential weights")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  calibrate_cmd->add_option("--correction", cal_correction, "Finite-sample rate correction: proportional or none")
      ->check(CLI::IsMember({"proportional", "none"}))
      ->capture_default_str();
  cal_score.add_to(calibrate_cmd);
  calibrate_cmd->add_option("--out", cal_out, "Output policy JSON")->required();

  // infer
  std::string inf_data;
  std::string inf_policy;
  std::string inf_out;
  std::string inf_per_instance;
  unsigned inf_jobs = 1;
  auto* infer = app.add_subcommand("infer", "Run a calibrated policy on the test split");
  infer->add_option("--data", inf_data, "Dataset directory or manifest.json")->required();
  infer->add_option("--policy", inf_policy, "Policy JSON written by calibrate")->required();
  infer->add_option("--out", inf_out, "Output summary JSON")->required();
  infer->add_option("--per-instance", inf_per_instance, "Optional per-instance CSV");
  infer->add_option("--jobs", inf_jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  // oracle
  std::string or_data;
  double or_budget = 0.0;
  std::string or_mode = "at-most";
  std::string or_out;
  bool or_fast = false;
  bool or_jittered = false;
  std::optional<double> or_resolution;
  ScoreFlags or_score;
  auto* oracle = app.add_subcommand("oracle", "Best per-instance head assignment under the budget (test split)");
  oracle->add_option("--data", or_data, "Dataset directory or manifest.json")->required();
  oracle->add_option("--budget", or_budget, "Total budget B in GFlops")->required();
  oracle->add_option("--mode", or_mode, "at-most: spend at most B; exact: spend exactly B")
      ->check(CLI::IsMember({"at-most", "exact"}))
      ->capture_default_str();
  oracle->add_option("--out", or_out, "Output summary JSON")->required();
  oracle->add_flag("--fast", or_fast, "Use the greedy heuristic instead of the exact DP (at-most mode)");
  oracle->add_option("--resolution", or_resolution, "Cost grid in GFlops (default: derived from head costs)")
      ->check(CLI::PositiveNumber);
  oracle->add_flag("--jittered", or_jittered, "Judge correctness on jittered predictions");
  or_score.add_to(oracle);

  // sweep
  std::string sw_data;
  std::string sw_budgets;
  double sw_beta = kDefaultBeta;
  std::string sw_out;
  unsigned sw_jobs = 1;
  std::optional<double> sw_resolution;
  ScoreFlags sw_score;
  auto* sweep = app.add_subcommand("sweep", "Accuracy and consumption versus budget for eero, oracle and each head");
  sweep->add_option("--data", sw_data, "Dataset directory or manifest.json")->required();
  sweep->add_option("--budgets", sw_budgets, "Comma-separated totals or linspace:lo:hi:n")->required();
  sweep->add_option("--beta", sw_beta, "Temperature of the exponential weights")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sw_score.add_to(sweep);
  sweep->add_option("--jobs", sw_jobs, "Budgets processed in parallel")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--resolution", sw_resolution, "Oracle cost grid in GFlops")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sw_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalidInput;
  }

  try {
    if (*synth) {
      const auto spec = synth_spec_from_json(read_json(synth_spec_path));
      write_dataset(synth_out, generate(spec));
      std::printf("wrote %zu heads x (%zu train, %zu calib, %zu test) to %s\n", spec.head_budgets.size(), spec.n_train,
                  spec.n_calib, spec.n_test, synth_out.c_str());
    } else if (*calibrate_cmd) {
      const auto data = load_manifest(cal_data);
      const auto calib = calib_with_risks(data);
      const std::size_t batch = cal_batch.value_or(data.test ? data.test->bank.num_instances() : calib.num_instances());
      const auto budget = BudgetSpec::make(cal_budget, batch);
      CalibrateOptions options;
      options.beta = cal_beta;
      options.score = cal_score.spec();
      options.correction = cal_correction == "none" ? RateCorrection::None : RateCorrection::Proportional;
      const auto record = calibrate(calib, budget, options);
      write_json(cal_out, to_json(record));

      std::printf("budget B = %.6g GFlops, T = %zu, B/T = %.6g, expected per-instance budget %.6g\n",
                  budget.total_budget, budget.batch_size, budget.mean_budget(), record.allocation.expected_budget);
      std::printf("%4s %10s %10s %10s %10s %12s\n", "head", "risk", "prior", "eps", "eps_seq", "threshold");
      for (std::size_t l = 0; l < record.risks.size(); ++l) {
        std::printf("%4zu %10.4f %10.4f %10.4f %10.4f %12.6g\n", l + 1, record.risks[l], record.prior[l],
                    record.allocation.epsilons[l], record.policy.seq_rates[l], record.policy.thresholds[l]);
      }
    } else if (*infer) {
      const auto data = load_manifest(inf_data);
      const auto& test = data.require(Split::Test);
      const auto record = calibration_from_json(read_json(inf_policy));
      std::optional<std::span<const std::size_t>> labels;
      if (test.labels) labels = std::span<const std::size_t>(*test.labels);
      const auto result = classify_batch(test.bank, record.policy, labels, InferenceOptions{inf_jobs, Split::Test});
      const auto allowed = BudgetSpec::make(record.budget.mean_budget() * static_cast<double>(result.batch_size()),
                                            result.batch_size());
      const auto report = measure_budget(result, allowed);
      write_json(inf_out, summary_json(result, report));
      if (!inf_per_instance.empty()) {
        write_text_atomic(inf_per_instance, per_instance_csv(result, test.instance_ids, test.labels));
      }
      if (result.accuracy) std::printf("accuracy %.4f\n", *result.accuracy);
      std::printf("consumed %.6g of %.6g GFlops (%.2f%%)%s\n", report.consumed, report.allowed,
                  100.0 * report.utilization, report.within_budget ? "" : "  OVER BUDGET");
      print_vector("exit proportions", result.exit_proportions);
    } else if (*oracle) {
      const auto data = load_manifest(or_data);
      const auto& test = data.require(Split::Test);
      if (!test.labels) throw Error(ErrorCode::MissingLabels, "the oracle needs test labels");
      const auto mode = or_mode == "exact" ? OracleMode::ExactBudget : OracleMode::AtMostBudget;
      std::optional<ScoreSpec> jitter;
      if (or_jittered) jitter = or_score.spec();
      const auto instance = make_oracle_instance(test.bank, *test.labels, or_budget, mode, jitter);
      if (or_fast && mode == OracleMode::ExactBudget) {
        throw Error(ErrorCode::InvalidArgument, "--fast supports only --mode at-most");
      }
      const auto result = or_fast ? oracle_greedy(instance, or_resolution) : oracle_exact(instance, or_resolution);
      write_json(or_out, summary_json(result, test.bank.num_heads(), or_budget));
      std::printf("%s accuracy %.4f, cost %.6g of %.6g GFlops\n", or_fast ? "greedy" : "exact", result.accuracy,
                  result.cost, or_budget);
    } else if (*sweep) {
      const auto data = load_manifest(sw_data);
      const auto calib = calib_with_risks(data);
      const auto& test = data.require(Split::Test);
      if (!test.labels) throw Error(ErrorCode::MissingLabels, "the sweep needs test labels");
      SweepOptions options;
      options.calibrate.beta = sw_beta;
      options.calibrate.score = sw_score.spec();
      options.jobs = sw_jobs;
      options.resolution = sw_resolution;
      const auto rows = run_sweep(calib, test.bank, *test.labels, parse_budget_list(sw_budgets), options);
      write_text_atomic(sw_out, sweep_csv(rows));
      std::printf("wrote %zu rows to %s\n", rows.size(), sw_out.c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    if (e.code() == ErrorCode::InfeasibleBudget) {
      std::fprintf(stderr, "the budget must cover at least T * (cheapest head budget)\n");
    }
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIoFailure;
  }
  return kOk;
}
