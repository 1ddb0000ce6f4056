#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "eero/io.hpp"
#include "eero/oracle.hpp"
#include "eero/pipeline.hpp"
#include "eero/synth.hpp"
#include "test_util.hpp"

namespace eero {
namespace {

namespace fs = std::filesystem;
using testing::code_of;

const fs::path kTiny = fs::path(EERO_DATA_DIR) / "tiny";

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("eero_pipeline_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const auto log = scratch() / ("log_" + std::to_string(counter++) + ".txt");
  const std::string cmd = env + " \"" + std::string(EERO_CLI_PATH) + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// A 2000-row synthetic dataset shared by the slower tests.
const fs::path& synth_dir() {
  static const fs::path dir = [] {
    auto spec = default_synth_spec(21);
    spec.n_train = 3000;
    spec.n_calib = 1000;
    spec.n_test = 2000;
    const auto d = scratch() / "synth";
    write_json(scratch() / "spec.json", to_json(spec));
    const auto r = cli("synth --spec " + q(scratch() / "spec.json") + " --out " + q(d));
    EXPECT_EQ(r.code, 0) << r.output;
    return d;
  }();
  return dir;
}

TEST(CliSynth, WritesALoadableDataset) {
  const auto& dir = synth_dir();
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "test" / "head_8.csv"));
  const auto ds = load_manifest(dir);
  EXPECT_EQ(ds.test->bank.num_instances(), 2000u);
  EXPECT_EQ(ds.test->bank.num_heads(), 8u);
}

TEST(CliSynth, UsageErrors) {
  const auto missing = cli("synth --out " + q(scratch() / "nothing"));
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.output.find("--spec"), std::string::npos);
  write_json(scratch() / "bad_spec.json", Json{{"head_accuracies", {0.5, 1.5}}, {"head_budgets", {1, 2}}});
  EXPECT_EQ(cli("synth --spec " + q(scratch() / "bad_spec.json") + " --out " + q(scratch() / "bad")).code, 2);
  EXPECT_EQ(cli("synth --spec " + q(scratch() / "missing.json") + " --out " + q(scratch() / "bad")).code, 3);
  EXPECT_EQ(cli("synth --spec x --out y --bogus").code, 2);
  EXPECT_EQ(cli("").code, 2);
}

TEST(CliHelp, EverySubcommandDocumentsItsFlags) {
  const std::map<std::string, std::vector<std::string>> flags{
      {"synth", {"--spec", "--out"}},
      {"calibrate", {"--data", "--budget", "--batch-size", "--beta", "--score", "--seed", "--out"}},
      {"infer", {"--data", "--policy", "--out", "--per-instance"}},
      {"oracle", {"--data", "--budget", "--mode", "--out", "--fast"}},
      {"sweep", {"--data", "--budgets", "--beta", "--out", "--jobs"}}};
  for (const auto& [cmd, names] : flags) {
    const auto r = cli(cmd + " --help");
    EXPECT_EQ(r.code, 0) << cmd;
    for (const auto& f : names) EXPECT_NE(r.output.find(f), std::string::npos) << cmd << " " << f;
  }
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(CliCalibrate, DeterministicOutput) {
  const auto a = scratch() / "policy_a.json";
  const auto b = scratch() / "policy_b.json";
  for (const auto& out : {a, b}) {
    const auto r = cli("calibrate --data " + q(kTiny) + " --budget 20 --seed 3 --out " + q(out));
    ASSERT_EQ(r.code, 0) << r.output;
  }
  EXPECT_EQ(slurp(a), slurp(b));
  const auto record = calibration_from_json(read_json(a));
  EXPECT_EQ(record.policy.score.seed, 3u);
  EXPECT_EQ(record.budget.batch_size, 8u);
}

TEST(CliCalibrate, SlackBudgetFollowsRiskOrdering) {
  const auto out = scratch() / "policy_slack.json";
  ASSERT_EQ(cli("calibrate --data " + q(kTiny) + " --budget 100 --beta 0.01 --out " + q(out)).code, 0);
  const auto record = calibration_from_json(read_json(out));
  EXPECT_EQ(record.allocation.multiplier, 0.0);
  const auto& eps = record.allocation.epsilons;
  const auto best_risk = std::min_element(record.risks.begin(), record.risks.end()) - record.risks.begin();
  EXPECT_EQ(std::max_element(eps.begin(), eps.end()) - eps.begin(), best_risk);
}

TEST(CliCalibrate, InfeasibleBudget) {
  const auto r = cli("calibrate --data " + q(kTiny) + " --budget 7 --out " + q(scratch() / "never.json"));
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.output.find("T * min budget = 8"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(scratch() / "never.json"));
}

TEST(CliCalibrate, SeedFallsBackToEnvironment) {
  const auto env = scratch() / "policy_env.json";
  const auto flag = scratch() / "policy_flag.json";
  const auto plain = scratch() / "policy_plain.json";
  ASSERT_EQ(cli("calibrate --data " + q(kTiny) + " --budget 20 --out " + q(env), "EERO_SEED=99").code, 0);
  ASSERT_EQ(cli("calibrate --data " + q(kTiny) + " --budget 20 --seed 99 --out " + q(flag)).code, 0);
  ASSERT_EQ(cli("calibrate --data " + q(kTiny) + " --budget 20 --out " + q(plain), "env -u EERO_SEED").code, 0);
  EXPECT_EQ(slurp(env), slurp(flag));
  EXPECT_EQ(calibration_from_json(read_json(plain)).policy.score.seed, 0u);
}

TEST(CliInfer, RunsAndReportsSummary) {
  const auto policy = scratch() / "infer_policy.json";
  ASSERT_EQ(cli("calibrate --data " + q(kTiny) + " --budget 18 --out " + q(policy)).code, 0);
  const auto out = scratch() / "infer.json";
  const auto csv = scratch() / "infer.csv";
  const auto r = cli("infer --data " + q(kTiny) + " --policy " + q(policy) + " --out " + q(out) + " --per-instance " +
                     q(csv));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto summary = read_json(out);
  EXPECT_NO_THROW(validate_summary_json(summary));
  EXPECT_EQ(summary["num_instances"].get<int>(), 8);
  EXPECT_EQ(summary["allowed_budget"].get<double>(), 18.0);
  const auto text = slurp(csv);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
  EXPECT_EQ(text.rfind("instance_id,exit_head,prediction,cost,correct\n100,", 0), 0u);
}

TEST(CliInfer, HeadCountMismatch) {
  const auto policy = scratch() / "mismatch_policy.json";
  ASSERT_EQ(cli("calibrate --data " + q(kTiny) + " --budget 20 --out " + q(policy)).code, 0);
  auto doc = read_json(policy);
  doc["policy"]["seq_rates"] = {0.5, 1.0};
  doc["policy"]["thresholds"] = {0.1, nullptr};
  write_json(policy, doc);
  EXPECT_EQ(cli("infer --data " + q(kTiny) + " --policy " + q(policy) + " --out " + q(scratch() / "x.json")).code, 5);
  EXPECT_EQ(cli("infer --data " + q(kTiny) + " --policy " + q(scratch() / "absent.json") + " --out x").code, 3);
}

TEST(CliOracle, MatchesEnumerationOnTinyData) {
  const auto ds = load_manifest(kTiny);
  const auto& test = ds.require(Split::Test);
  for (double budget : {8.0, 12.5, 17.0, 20.0, 32.0}) {
    const auto out = scratch() / "oracle.json";
    const auto r = cli("oracle --data " + q(kTiny) + " --budget " + std::to_string(budget) + " --out " + q(out));
    ASSERT_EQ(r.code, 0) << r.output;
    const auto summary = read_json(out);
    EXPECT_NO_THROW(validate_summary_json(summary));
    EXPECT_TRUE(summary["oracle"].get<bool>());
    const auto inst = make_oracle_instance(test.bank, *test.labels, budget);
    const auto e = testing::enumerate_oracle(inst);
    EXPECT_DOUBLE_EQ(summary["accuracy"].get<double>(), static_cast<double>(e.best_correct) / 8.0) << budget;
    EXPECT_DOUBLE_EQ(summary["consumed_budget"].get<double>(), e.best_cost) << budget;

    const auto fast = scratch() / "oracle_fast.json";
    ASSERT_EQ(cli("oracle --fast --data " + q(kTiny) + " --budget " + std::to_string(budget) + " --out " + q(fast)).code,
              0);
    EXPECT_LE(read_json(fast)["accuracy"].get<double>(), summary["accuracy"].get<double>());
  }
}

TEST(CliOracle, ErrorCodes) {
  EXPECT_EQ(cli("oracle --data " + q(kTiny) + " --budget 7 --out " + q(scratch() / "o.json")).code, 4);
  EXPECT_EQ(cli("oracle --data " + q(kTiny) + " --budget 9 --mode exact --out " + q(scratch() / "o.json")).code, 4);
  EXPECT_EQ(cli("oracle --data " + q(kTiny) + " --budget 9 --resolution 3 --out " + q(scratch() / "o.json")).code, 6);
  EXPECT_EQ(cli("oracle --data " + q(kTiny) + " --budget 9 --mode sideways --out " + q(scratch() / "o.json")).code, 2);
  const auto exact = scratch() / "exact.json";
  ASSERT_EQ(cli("oracle --data " + q(kTiny) + " --budget 11 --mode exact --out " + q(exact)).code, 0);
  EXPECT_DOUBLE_EQ(read_json(exact)["consumed_budget"].get<double>(), 11.0);
}

TEST(CliSweep, RowsAndDominance) {
  const auto out = scratch() / "sweep.csv";
  const auto r = cli("sweep --data " + q(synth_dir()) + " --budgets 4000,7000,12000 --jobs 2 --out " + q(out));
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kSweepHeader);
  std::map<double, std::map<std::string, std::string>> acc;
  std::map<double, std::map<std::string, bool>> fits;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() == 4) f.push_back("");
    ASSERT_EQ(f.size(), 5u) << line;
    acc[std::stod(f[0])][f[4]] = f[1];
    fits[std::stod(f[0])][f[4]] = f[3] == "true";
    if (f[4] == "eero" || f[4] == "oracle") EXPECT_EQ(f[3], "true") << line;
  }
  EXPECT_EQ(rows, 3u * (8 + 2));
  for (const auto& [budget, by_source] : acc) {
    const double eero = std::stod(by_source.at("eero"));
    EXPECT_GE(std::stod(by_source.at("oracle")), eero) << budget;
    for (std::size_t l = 1; l <= 8; ++l) {
      const auto name = "head_" + std::to_string(l);
      if (fits[budget][name]) EXPECT_GE(eero, std::stod(by_source.at(name))) << budget << " head " << l;
    }
  }
}

TEST(CliSweep, WorkerErrorsReachTheExitCode) {
  EXPECT_EQ(cli("sweep --data " + q(kTiny) + " --budgets 9,12 --jobs 2 --resolution 3 --out " + q(scratch() / "s3.csv"))
                .code,
            6);
}

TEST(CliSweep, BadBudgetList) {
  EXPECT_EQ(cli("sweep --data " + q(kTiny) + " --budgets 10,abc --out " + q(scratch() / "s.csv")).code, 2);
  EXPECT_EQ(cli("sweep --data " + q(kTiny) + " --budgets 5,20 --out " + q(scratch() / "s2.csv")).code, 4);
  EXPECT_FALSE(fs::exists(scratch() / "s2.csv"));
}

TEST(ParseBudgetList, Forms) {
  EXPECT_EQ(parse_budget_list("1,2.5,4"), (std::vector<double>{1, 2.5, 4}));
  EXPECT_EQ(parse_budget_list("linspace:10:20:3"), (std::vector<double>{10, 15, 20}));
  EXPECT_EQ(code_of([] { parse_budget_list("linspace:1:2"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { parse_budget_list(""); }), ErrorCode::InvalidArgument);
}

TEST(TinyDataset, LoadsWithAllSplits) {
  const auto ds = load_manifest(kTiny);
  EXPECT_EQ(ds.num_classes, 3u);
  EXPECT_EQ(ds.budgets, (std::vector<double>{1.0, 2.5, 4.0}));
  EXPECT_EQ(ds.train->bank.num_instances(), 12u);
  EXPECT_EQ(ds.calib->bank.num_instances(), 10u);
  EXPECT_EQ(ds.test->bank.num_instances(), 8u);
  EXPECT_TRUE(ds.train->labels && ds.calib->labels && ds.test->labels);
  const auto risks = resolve_risks(ds);
  EXPECT_EQ(risks, compute_risks(ds.train->bank, ds.train->labels));
}

}  // namespace
}  // namespace eero
