#include <gtest/gtest.h>
#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "eero/allocation.hpp"
#include "eero/calibration.hpp"
#include "eero/io.hpp"
#include "eero/synth.hpp"
#include "test_util.hpp"

namespace eero {
namespace {

namespace fs = std::filesystem;
using testing::code_of;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("eero_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             std::to_string(counter++) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << content;
}

void write_minimal(const fs::path& dir, const std::string& eol = "\n") {
  write_file(dir / "manifest.json", R"({
    "num_classes": 2,
    "heads": [
      {"budget_gflops": 1.0, "probs_csv": {"test": "h1.csv"}},
      {"budget_gflops": 2.5, "risk": 0.1, "probs_csv": {"test": "h2.csv"}}
    ],
    "labels_csv": {"test": "labels.csv"}
  })");
  write_file(dir / "h1.csv", "instance_id,p_1,p_2" + eol + "3,0.9,0.1" + eol + "7,0.4,0.6" + eol + "9,0.5,0.5" + eol);
  write_file(dir / "h2.csv", "instance_id,p_1,p_2" + eol + "3,1,0" + eol + "7,0.25,0.75" + eol + "9,0.3,0.7" + eol);
  write_file(dir / "labels.csv", "instance_id,label" + eol + "3,1" + eol + "7,2" + eol + "9,1" + eol);
}

TEST(LoadManifest, MinimalDataset) {
  TempDir tmp;
  write_minimal(tmp.path());
  const auto ds = load_manifest(tmp.path());
  EXPECT_EQ(ds.num_classes, 2u);
  EXPECT_FALSE(ds.train.has_value());
  ASSERT_TRUE(ds.test.has_value());
  const auto& test = ds.require(Split::Test);
  EXPECT_EQ(test.bank.num_heads(), 2u);
  EXPECT_EQ(test.bank.num_classes(), 2u);
  EXPECT_EQ(test.bank.num_instances(), 3u);
  EXPECT_EQ(test.instance_ids, (std::vector<std::int64_t>{3, 7, 9}));
  EXPECT_EQ(*test.labels, (std::vector<std::size_t>{0, 1, 0}));
  EXPECT_EQ(test.bank.head(1).risk, 0.1);
  EXPECT_FALSE(test.bank.head(0).risk.has_value());
  EXPECT_EQ(test.bank.head(1).probs.row(1)[1], 0.75);
  EXPECT_EQ(code_of([&] { ds.require(Split::Calib); }), ErrorCode::InvalidArgument);
}

TEST(LoadManifest, AcceptsCrlf) {
  TempDir a;
  TempDir b;
  write_minimal(a.path(), "\n");
  write_minimal(b.path(), "\r\n");
  EXPECT_EQ(load_manifest(a.path()).test->bank, load_manifest(b.path() / "manifest.json").test->bank);
}

TEST(LoadManifest, ShortRowIsAParseErrorNamingTheRow) {
  TempDir tmp;
  write_minimal(tmp.path());
  write_file(tmp.path() / "h2.csv", "instance_id,p_1,p_2\n3,1,0\n7,0.25\n9,0.3,0.7\n");
  try {
    load_manifest(tmp.path());
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("h2.csv:3:"), std::string::npos) << e.what();
  }
}

TEST(LoadManifest, ReportsBadFieldsWithColumn) {
  TempDir tmp;
  write_minimal(tmp.path());
  write_file(tmp.path() / "h1.csv", "instance_id,p_1,p_2\n3,0.9,x\n7,0.4,0.6\n9,0.5,0.5\n");
  try {
    load_manifest(tmp.path());
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("h1.csv:2:3:"), std::string::npos) << e.what();
  }
}

TEST(LoadManifest, Errors) {
  TempDir tmp;
  EXPECT_EQ(code_of([&] { load_manifest(tmp.path()); }), ErrorCode::FileNotFound);
  write_minimal(tmp.path());
  fs::remove(tmp.path() / "h2.csv");
  EXPECT_EQ(code_of([&] { load_manifest(tmp.path()); }), ErrorCode::FileNotFound);

  write_minimal(tmp.path());
  write_file(tmp.path() / "labels.csv", "instance_id,label\n3,1\n8,2\n9,1\n");
  EXPECT_EQ(code_of([&] { load_manifest(tmp.path()); }), ErrorCode::ParseError);

  write_minimal(tmp.path());
  write_file(tmp.path() / "labels.csv", "instance_id,label\n3,1\n7,3\n9,1\n");
  EXPECT_EQ(code_of([&] { load_manifest(tmp.path()); }), ErrorCode::ParseError);

  write_minimal(tmp.path());
  write_file(tmp.path() / "h1.csv", "instance_id,p_1,p_2\n3,0.9,0.2\n7,0.4,0.6\n9,0.5,0.5\n");
  EXPECT_EQ(code_of([&] { load_manifest(tmp.path()); }), ErrorCode::RowNotNormalized);

  write_minimal(tmp.path());
  write_file(tmp.path() / "h1.csv", "instance_id,p_1,p_2\n3,0.9,0.1\n3,0.4,0.6\n9,0.5,0.5\n");
  EXPECT_EQ(code_of([&] { load_manifest(tmp.path()); }), ErrorCode::ParseError);

  write_minimal(tmp.path());
  write_file(tmp.path() / "manifest.json", "{ not json");
  EXPECT_EQ(code_of([&] { load_manifest(tmp.path()); }), ErrorCode::ParseError);
}

TEST(LoadManifest, ReadsGzippedCsv) {
  TempDir tmp;
  write_minimal(tmp.path());
  const std::string csv = "instance_id,p_1,p_2\n3,1,0\n7,0.25,0.75\n9,0.3,0.7\n";
  gzFile gz = gzopen((tmp.path() / "h2.csv.gz").c_str(), "wb");
  gzwrite(gz, csv.data(), static_cast<unsigned>(csv.size()));
  gzclose(gz);
  fs::remove(tmp.path() / "h2.csv");
  std::ifstream in(tmp.path() / "manifest.json");
  std::string manifest((std::istreambuf_iterator<char>(in)), {});
  manifest.replace(manifest.find("h2.csv"), 6, "h2.csv.gz");
  write_file(tmp.path() / "manifest.json", manifest);
  EXPECT_EQ(load_manifest(tmp.path()).test->bank.head(1).probs.row(2)[1], 0.7);
}

TEST(WriteDataset, RoundTripIsBitwise) {
  TempDir tmp;
  auto spec = default_synth_spec(9);
  spec.n_train = 120;
  spec.n_calib = 80;
  spec.n_test = 60;
  const auto data = generate(spec);
  write_dataset(tmp.path(), data);
  const auto ds = load_manifest(tmp.path());
  EXPECT_EQ(ds.budgets, spec.head_budgets);
  EXPECT_EQ(ds.train->bank, data.train.bank);
  EXPECT_EQ(ds.calib->bank, data.calib.bank);
  EXPECT_EQ(ds.test->bank, data.test.bank);
  EXPECT_EQ(*ds.train->labels, data.train.labels);
  EXPECT_EQ(*ds.test->labels, data.test.labels);
}

TEST(ComputeRisks, Examples) {
  const auto bank = testing::make_bank(
      {{{0.9, 0.1, 0, 0}, {0.1, 0.9, 0, 0}, {0, 0.1, 0.9, 0}, {0, 0, 0.1, 0.9}},
       {{0.7, 0.1, 0.1, 0.1}, {0.7, 0.1, 0.1, 0.1}, {0.7, 0.1, 0.1, 0.1}, {0.7, 0.1, 0.1, 0.1}}},
      {1, 2});
  const std::vector<std::size_t> labels{0, 1, 2, 3};
  const auto risks = compute_risks(bank, labels);
  EXPECT_EQ(risks[0], 0.0);
  EXPECT_EQ(risks[1], 0.75);
  EXPECT_EQ(code_of([&] { compute_risks(bank, std::nullopt); }), ErrorCode::MissingLabels);
  EXPECT_EQ(code_of([&] { compute_risks(bank, std::vector<std::size_t>{0, 1}); }), ErrorCode::LabelLengthMismatch);
}

TEST(JsonRoundTrip, AllocationResult) {
  const auto p = AllocationProblem::make({0.7, 0.3, 0.1}, {1, 2.5, 4}, default_prior(std::vector<double>{1, 2.5, 4}),
                                         0.1, 2.0);
  const auto r = solve_allocation(p);
  EXPECT_EQ(allocation_from_json(Json::parse(to_json(r).dump())), r);
  AllocationResult degenerate{{1.0, 0.0}, std::numeric_limits<double>::infinity(), 1.0, 0.5, true};
  const auto j = to_json(degenerate);
  EXPECT_TRUE(j["multiplier"].is_null());
  EXPECT_EQ(allocation_from_json(Json::parse(j.dump())), degenerate);
}

TEST(JsonRoundTrip, PolicyAndCalibrationRecord) {
  std::mt19937_64 rng(1);
  const auto bank = testing::random_bank(rng, 3, 100, 5);
  const AllocationResult alloc{{0.35, 0.4, 0.25}, 0.3, 1.9, 0.02, true};
  const auto policy = build_policy(bank, alloc, ScoreSpec{ScoreKind::NegEntropy, 1e-5, 123456789012345ULL});
  EXPECT_EQ(policy_from_json(Json::parse(to_json(policy).dump())), policy);

  const CalibrationRecord rec{BudgetSpec{190.0, 100}, 0.1, {0.5, 0.3, 0.2}, {6.0 / 11, 3.0 / 11, 2.0 / 11}, alloc,
                              policy};
  TempDir tmp;
  write_json(tmp.path() / "policy.json", to_json(rec));
  const auto back = calibration_from_json(read_json(tmp.path() / "policy.json"));
  EXPECT_EQ(back.policy, policy);
  EXPECT_EQ(back.allocation, alloc);
  EXPECT_EQ(back.risks, rec.risks);
  EXPECT_EQ(back.prior, rec.prior);
  EXPECT_EQ(back.budget.total_budget, 190.0);
  EXPECT_EQ(back.budget.batch_size, 100u);
  EXPECT_EQ(code_of([] { calibration_from_json(Json::object()); }), ErrorCode::ParseError);
}

TEST(JsonRoundTrip, SynthSpec) {
  auto spec = default_synth_spec(42);
  spec.logit_noise = 0.3;
  const auto back = synth_spec_from_json(Json::parse(to_json(spec).dump()));
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.head_accuracies, spec.head_accuracies);
  EXPECT_EQ(back.logit_noise, 0.3);
  EXPECT_EQ(code_of([] { synth_spec_from_json(Json{{"sead", 1}}); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(code_of([] { synth_spec_from_json(Json{{"seed", "x"}}); }), ErrorCode::InvalidSpec);
}

TEST(FormatDouble, RoundTrips) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    ASSERT_EQ(std::stod(format_double(x)), x);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(SweepCsv, HeaderAndRows) {
  std::vector<SweepRow> rows;
  for (double b : {10.0, 20.0, 30.0}) {
    rows.push_back({b, 0.5, b - 1, true, "eero"});
    rows.push_back({b, 0.9, b, true, "oracle"});
    rows.push_back({b, std::nullopt, 0.0, false, "head_2"});
  }
  const auto csv = sweep_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kSweepHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 9);
  EXPECT_NE(csv.find("30,,0,false,head_2\n"), std::string::npos);
}

TEST(SummaryJson, ValidatesOnRandomResults) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick_m(2, 9);
  std::uniform_int_distribution<std::size_t> pick_t(1, 200);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = pick_m(rng);
    const std::size_t t = pick_t(rng);
    std::uniform_int_distribution<std::size_t> head(0, m - 1);
    if (trial % 2) {
      BatchResult r;
      std::vector<std::size_t> counts(m, 0);
      for (std::size_t i = 0; i < t; ++i) {
        r.exits.push_back(head(rng));
        r.predictions.push_back(0);
        r.per_instance_cost.push_back(static_cast<double>(r.exits.back() + 1));
        r.consumed_budget += r.per_instance_cost.back();
        ++counts[r.exits.back()];
      }
      for (std::size_t c : counts) r.exit_proportions.push_back(static_cast<double>(c) / static_cast<double>(t));
      if (coin(rng)) r.accuracy = 0.25;
      std::optional<BudgetReport> report;
      if (coin(rng)) report = measure_budget(r, BudgetSpec{static_cast<double>(t) * 2.0, t});
      const auto j = summary_json(r, report);
      EXPECT_NO_THROW(validate_summary_json(Json::parse(j.dump())));
      EXPECT_FALSE(j["oracle"].get<bool>());
    } else {
      OracleResult o;
      for (std::size_t i = 0; i < t; ++i) {
        o.assignment.push_back(head(rng));
        o.cost += static_cast<double>(o.assignment.back() + 1);
      }
      o.accuracy = 0.5;
      const auto j = summary_json(o, m, static_cast<double>(t * m));
      EXPECT_NO_THROW(validate_summary_json(j));
      EXPECT_TRUE(j["oracle"].get<bool>());
      EXPECT_TRUE(j["within_budget"].get<bool>());
    }
  }
  OracleResult o{{0, 1}, 1, 0.5, 3.0};
  auto broken = summary_json(o, 2, 4.0);
  broken["accuracy"] = 1.5;
  EXPECT_EQ(code_of([&] { validate_summary_json(broken); }), ErrorCode::ParseError);
  broken = summary_json(o, 2, 4.0);
  broken.erase("utilization");
  EXPECT_EQ(code_of([&] { validate_summary_json(broken); }), ErrorCode::ParseError);
}

TEST(WriteTextAtomic, ReplacesWholeFile) {
  TempDir tmp;
  const auto p = tmp.path() / "out" / "x.txt";
  write_text_atomic(p, "first version\n");
  write_text_atomic(p, "second\n");
  EXPECT_EQ(read_text(p), "second\n");
  EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
}

TEST(PerInstanceCsv, OneBasedColumns) {
  BatchResult r;
  r.exits = {0, 2};
  r.predictions = {1, 0};
  r.per_instance_cost = {1.0, 4.5};
  const std::vector<std::int64_t> ids{10, 11};
  EXPECT_EQ(per_instance_csv(r, ids, std::vector<std::size_t>{1, 1}),
            "instance_id,exit_head,prediction,cost,correct\n10,1,2,1,1\n11,3,1,4.5,0\n");
  EXPECT_EQ(per_instance_csv(r, ids, std::nullopt), "instance_id,exit_head,prediction,cost,correct\n10,1,2,1,\n11,3,1,4.5,\n");
}

}  // namespace
}  // namespace eero
