#include "eero/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>
#include <string_view>

#include "eero/scoring.hpp"

namespace eero {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void parse_error(const fs::path& file, std::size_t row, std::size_t column, const std::string& what) {
  throw Error(ErrorCode::ParseError,
              file.string() + ":" + std::to_string(row) + ":" + std::to_string(column) + ": " + what);
}

[[noreturn]] void json_error(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

/// Splits into lines, accepting LF or CRLF; a trailing newline does not
/// produce an empty last line.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size() && !field.empty();
}

void check_header(const fs::path& file, std::string_view line, const std::vector<std::string>& expected) {
  const auto fields = split_fields(line);
  for (std::size_t c = 0; c < std::max(fields.size(), expected.size()); ++c) {
    if (c >= fields.size() || c >= expected.size() || trim(fields[c]) != expected[c]) {
      std::string want;
      for (std::size_t e = 0; e < expected.size(); ++e) want += (e ? "," : "") + expected[e];
      parse_error(file, 1, c + 1, "header must be '" + want + "'");
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& rel) {
  const fs::path p(rel);
  return p.is_absolute() ? p : base / p;
}

template <typename T>
T json_get(const Json& j, const char* key, const std::string& context) {
  if (!j.is_object() || !j.contains(key)) json_error(context + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    json_error(context + ": key '" + key + "': " + e.what());
  }
}

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::vector<double> exit_proportions_of(std::span<const std::size_t> heads, std::size_t m) {
  std::vector<std::size_t> counts(m, 0);
  for (std::size_t h : heads) ++counts[h];
  std::vector<double> out(m);
  for (std::size_t l = 0; l < m; ++l) out[l] = static_cast<double>(counts[l]) / static_cast<double>(heads.size());
  return out;
}

}  // namespace

std::string_view split_name(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Calib: return "calib";
    case Split::Test: return "test";
  }
  return "test";
}

const std::optional<SplitData>& Dataset::split(Split s) const noexcept {
  switch (s) {
    case Split::Train: return train;
    case Split::Calib: return calib;
    case Split::Test: return test;
  }
  return test;
}

const SplitData& Dataset::require(Split s) const {
  const auto& d = split(s);
  if (!d) throw Error(ErrorCode::InvalidArgument, "dataset has no '" + std::string(split_name(s)) + "' split");
  return *d;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::string read_text(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::FileNotFound, path.string());
  if (path.extension() == ".gz") {
    gzFile gz = gzopen(path.c_str(), "rb");
    if (gz == nullptr) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::string out;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(gz, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool failed = n < 0;
    gzclose(gz);
    if (failed) throw Error(ErrorCode::IoError, "corrupt gzip stream in " + path.string());
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot rename onto " + path.string());
  }
}

ProbsCsv read_probs_csv(const fs::path& path, std::size_t num_classes) {
  const std::string text = read_text(path);
  const auto lines = split_lines(text);
  std::vector<std::string> header{"instance_id"};
  for (std::size_t k = 1; k <= num_classes; ++k) header.push_back("p_" + std::to_string(k));
  if (lines.empty()) parse_error(path, 1, 1, "empty file");
  check_header(path, lines.front(), header);

  const std::size_t n = lines.size() - 1;
  ProbsCsv out;
  out.instance_ids.reserve(n);
  std::vector<double> data;
  data.reserve(n * num_classes);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::size_t row = r + 1;
    const auto fields = split_fields(lines[r]);
    if (fields.size() != num_classes + 1) {
      parse_error(path, row, std::min(fields.size(), num_classes + 1) + 1,
                  "expected " + std::to_string(num_classes + 1) + " columns, found " + std::to_string(fields.size()));
    }
    std::int64_t id = 0;
    if (!parse_number(fields[0], id)) parse_error(path, row, 1, "bad instance_id '" + std::string(fields[0]) + "'");
    if (!out.instance_ids.empty() && id <= out.instance_ids.back()) {
      parse_error(path, row, 1, "instance ids must be strictly increasing");
    }
    out.instance_ids.push_back(id);
    for (std::size_t k = 0; k < num_classes; ++k) {
      double p = 0.0;
      if (!parse_number(fields[k + 1], p)) {
        parse_error(path, row, k + 2, "bad probability '" + std::string(fields[k + 1]) + "'");
      }
      data.push_back(p);
    }
  }
  if (n == 0) parse_error(path, 2, 1, "no data rows");
  out.probs = ProbMatrix(n, num_classes, std::move(data));
  return out;
}

std::vector<std::size_t> read_labels_csv(const fs::path& path, std::size_t num_classes,
                                         std::span<const std::int64_t> expected_ids) {
  const std::string text = read_text(path);
  const auto lines = split_lines(text);
  if (lines.empty()) parse_error(path, 1, 1, "empty file");
  check_header(path, lines.front(), {"instance_id", "label"});
  if (lines.size() - 1 != expected_ids.size()) {
    throw Error(ErrorCode::LabelLengthMismatch, path.string() + ": " + std::to_string(lines.size() - 1) +
                                                    " labels for " + std::to_string(expected_ids.size()) + " instances");
  }
  std::vector<std::size_t> labels;
  labels.reserve(expected_ids.size());
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::size_t row = r + 1;
    const auto fields = split_fields(lines[r]);
    if (fields.size() != 2) parse_error(path, row, std::min<std::size_t>(fields.size(), 2) + 1, "expected 2 columns");
    std::int64_t id = 0;
    if (!parse_number(fields[0], id)) parse_error(path, row, 1, "bad instance_id");
    if (id != expected_ids[r - 1]) {
      parse_error(path, row, 1, "instance_id " + std::to_string(id) + " does not match probabilities row id " +
                                    std::to_string(expected_ids[r - 1]));
    }
    std::int64_t label = 0;
    if (!parse_number(fields[1], label) || label < 1 || label > static_cast<std::int64_t>(num_classes)) {
      parse_error(path, row, 2, "label must be an integer in [1, " + std::to_string(num_classes) + "]");
    }
    labels.push_back(static_cast<std::size_t>(label - 1));
  }
  return labels;
}

Dataset load_manifest(const fs::path& path) {
  const fs::path manifest_path = fs::is_directory(path) ? path / "manifest.json" : path;
  const fs::path base = manifest_path.parent_path();
  const Json manifest = read_json(manifest_path);
  const std::string ctx = manifest_path.string();

  Dataset ds;
  const auto k = json_get<std::int64_t>(manifest, "num_classes", ctx);
  if (k < 2) json_error(ctx + ": num_classes must be at least 2");
  ds.num_classes = static_cast<std::size_t>(k);
  if (!manifest.contains("heads") || !manifest["heads"].is_array()) json_error(ctx + ": 'heads' must be an array");
  const auto& heads = manifest["heads"];

  struct HeadEntry {
    double budget = 0.0;
    std::optional<double> risk;
    std::optional<std::string> files[3];
  };
  std::vector<HeadEntry> entries;
  for (std::size_t l = 0; l < heads.size(); ++l) {
    const std::string hctx = ctx + ": heads[" + std::to_string(l) + "]";
    HeadEntry e;
    e.budget = json_get<double>(heads[l], "budget_gflops", hctx);
    if (heads[l].contains("risk") && !heads[l]["risk"].is_null()) e.risk = json_get<double>(heads[l], "risk", hctx);
    const auto files = json_get<Json>(heads[l], "probs_csv", hctx);
    if (!files.is_object()) json_error(hctx + ": probs_csv must be an object keyed by split");
    for (const auto& [key, value] : files.items()) {
      if (key != "train" && key != "calib" && key != "test") json_error(hctx + ": unknown split '" + key + "'");
      if (!value.is_string()) json_error(hctx + ": probs_csv." + key + " must be a path");
    }
    for (Split s : {Split::Train, Split::Calib, Split::Test}) {
      const std::string name(split_name(s));
      if (files.contains(name)) e.files[static_cast<int>(s)] = files[name].get<std::string>();
    }
    if (l > 0) {
      for (int s = 0; s < 3; ++s) {
        if (e.files[s].has_value() != entries.front().files[s].has_value()) {
          json_error(hctx + ": every head must list the same splits");
        }
      }
    }
    entries.push_back(std::move(e));
    ds.budgets.push_back(entries.back().budget);
  }
  if (entries.empty()) json_error(ctx + ": no heads");

  Json labels_obj = manifest.contains("labels_csv") ? manifest["labels_csv"] : Json::object();
  if (!labels_obj.is_object()) json_error(ctx + ": labels_csv must be an object keyed by split");

  for (Split s : {Split::Train, Split::Calib, Split::Test}) {
    const int si = static_cast<int>(s);
    if (!entries.front().files[si]) continue;
    std::vector<std::future<ProbsCsv>> pending;
    for (const auto& e : entries) {
      pending.push_back(std::async(std::launch::async, [&, file = resolve(base, *e.files[si])] {
        return read_probs_csv(file, ds.num_classes);
      }));
    }
    std::vector<ProbsCsv> loaded;
    for (auto& f : pending) loaded.push_back(f.get());

    std::vector<HeadSlice> slices;
    for (std::size_t l = 0; l < entries.size(); ++l) {
      if (l > 0 && loaded[l].instance_ids != loaded[0].instance_ids) {
        throw Error(ErrorCode::ShapeMismatch, std::string(split_name(s)) + " split: head " + std::to_string(l + 1) +
                                                  " lists different instance ids than head 1");
      }
      slices.push_back(HeadSlice{std::move(loaded[l].probs), entries[l].budget, entries[l].risk});
    }
    SplitData split{HeadBank::validate(std::move(slices)), std::move(loaded[0].instance_ids), std::nullopt};
    const std::string name(split_name(s));
    if (labels_obj.contains(name)) {
      if (!labels_obj[name].is_string()) json_error(ctx + ": labels_csv." + name + " must be a path");
      split.labels = read_labels_csv(resolve(base, labels_obj[name].get<std::string>()), ds.num_classes,
                                     split.instance_ids);
    }
    switch (s) {
      case Split::Train: ds.train = std::move(split); break;
      case Split::Calib: ds.calib = std::move(split); break;
      case Split::Test: ds.test = std::move(split); break;
    }
  }
  return ds;
}

std::vector<double> compute_risks(const HeadBank& bank, const std::optional<std::vector<std::size_t>>& labels) {
  if (!labels) throw Error(ErrorCode::MissingLabels, "risks need a labeled split");
  const std::size_t n = bank.num_instances();
  if (labels->size() != n) {
    throw Error(ErrorCode::LabelLengthMismatch, std::to_string(labels->size()) + " labels for " + std::to_string(n) +
                                                    " instances");
  }
  std::vector<double> risks(bank.num_heads());
  for (std::size_t l = 0; l < bank.num_heads(); ++l) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < n; ++i) wrong += head_predict(bank.head(l).probs.row(i)) != (*labels)[i] ? 1 : 0;
    risks[l] = static_cast<double>(wrong) / static_cast<double>(n);
  }
  return risks;
}

void write_dataset(const fs::path& dir, const SynthData& data) {
  const std::size_t m = data.test.bank.num_heads();
  const std::size_t k = data.test.bank.num_classes();
  Json manifest;
  manifest["num_classes"] = k;
  Json heads = Json::array();
  for (std::size_t l = 0; l < m; ++l) {
    Json h;
    h["budget_gflops"] = data.test.bank.head(l).budget_gflops;
    if (const auto& r = data.test.bank.head(l).risk) h["risk"] = *r;
    Json files;
    for (Split s : {Split::Train, Split::Calib, Split::Test}) {
      files[std::string(split_name(s))] = std::string(split_name(s)) + "/head_" + std::to_string(l + 1) + ".csv";
    }
    h["probs_csv"] = files;
    heads.push_back(h);
  }
  manifest["heads"] = heads;
  manifest["labels_csv"] = {{"train", "train/labels.csv"}, {"calib", "calib/labels.csv"}, {"test", "test/labels.csv"}};

  const std::pair<Split, const LabeledSplit*> splits[] = {
      {Split::Train, &data.train}, {Split::Calib, &data.calib}, {Split::Test, &data.test}};
  for (const auto& [s, split] : splits) {
    const fs::path sub = dir / std::string(split_name(s));
    for (std::size_t l = 0; l < m; ++l) {
      std::string out = "instance_id";
      for (std::size_t c = 1; c <= k; ++c) out += ",p_" + std::to_string(c);
      out += '\n';
      const auto& probs = split->bank.head(l).probs;
      for (std::size_t i = 0; i < probs.rows(); ++i) {
        out += std::to_string(i);
        for (double p : probs.row(i)) {
          out += ',';
          out += format_double(p);
        }
        out += '\n';
      }
      write_text_atomic(sub / ("head_" + std::to_string(l + 1) + ".csv"), out);
    }
    std::string labels = "instance_id,label\n";
    for (std::size_t i = 0; i < split->labels.size(); ++i) {
      labels += std::to_string(i) + "," + std::to_string(split->labels[i] + 1) + "\n";
    }
    write_text_atomic(sub / "labels.csv", labels);
  }
  write_json(dir / "manifest.json", manifest);
}

void write_json(const fs::path& path, const Json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

Json to_json(const AllocationResult& r) {
  Json j;
  j["epsilons"] = r.epsilons;
  j["multiplier"] = nullable(r.multiplier);
  j["expected_budget"] = r.expected_budget;
  j["kl_to_prior"] = r.kl_to_prior;
  j["saturated"] = r.saturated;
  return j;
}

AllocationResult allocation_from_json(const Json& j) {
  const std::string ctx = "allocation";
  AllocationResult r;
  r.epsilons = json_get<std::vector<double>>(j, "epsilons", ctx);
  r.multiplier = j.contains("multiplier") && j["multiplier"].is_null() ? std::numeric_limits<double>::infinity()
                                                                       : json_get<double>(j, "multiplier", ctx);
  r.expected_budget = json_get<double>(j, "expected_budget", ctx);
  r.kl_to_prior = json_get<double>(j, "kl_to_prior", ctx);
  r.saturated = json_get<bool>(j, "saturated", ctx);
  return r;
}

Json to_json(const ExitPolicy& p) {
  Json j;
  j["score_kind"] = std::string(to_string(p.score.kind));
  j["jitter_u"] = p.score.jitter_u;
  j["seed"] = p.score.seed;
  j["seq_rates"] = p.seq_rates;
  Json thresholds = Json::array();
  for (double t : p.thresholds) thresholds.push_back(nullable(t));
  j["thresholds"] = thresholds;
  j["calibration_size"] = p.calibration_size;
  return j;
}

ExitPolicy policy_from_json(const Json& j) {
  const std::string ctx = "policy";
  ExitPolicy p;
  const auto kind = parse_score_kind(json_get<std::string>(j, "score_kind", ctx));
  if (!kind) json_error(ctx + ": unknown score_kind");
  p.score.kind = *kind;
  p.score.jitter_u = json_get<double>(j, "jitter_u", ctx);
  p.score.seed = json_get<std::uint64_t>(j, "seed", ctx);
  p.seq_rates = json_get<std::vector<double>>(j, "seq_rates", ctx);
  const auto thresholds = json_get<Json>(j, "thresholds", ctx);
  if (!thresholds.is_array()) json_error(ctx + ": thresholds must be an array");
  for (const auto& t : thresholds) {
    if (t.is_null()) {
      p.thresholds.push_back(-std::numeric_limits<double>::infinity());
    } else if (t.is_number()) {
      p.thresholds.push_back(t.get<double>());
    } else {
      json_error(ctx + ": thresholds must be numbers or null");
    }
  }
  p.calibration_size = json_get<std::size_t>(j, "calibration_size", ctx);
  if (p.seq_rates.size() != p.thresholds.size() || p.seq_rates.empty()) {
    json_error(ctx + ": seq_rates and thresholds must have the same non-zero length");
  }
  if (p.seq_rates.back() != 1.0) json_error(ctx + ": the last sequential rate must be 1");
  if (!(p.score.jitter_u >= 0.0)) json_error(ctx + ": jitter_u must be non-negative");
  return p;
}

Json to_json(const BudgetSpec& b) {
  Json j;
  j["total_budget"] = b.total_budget;
  j["batch_size"] = b.batch_size;
  j["mean_budget"] = b.mean_budget();
  return j;
}

BudgetSpec budget_from_json(const Json& j) {
  return BudgetSpec::make(json_get<double>(j, "total_budget", "budget"), json_get<std::size_t>(j, "batch_size", "budget"));
}

SynthSpec synth_spec_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidSpec, "synth spec must be a JSON object");
  SynthSpec s = default_synth_spec();
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "num_classes") s.num_classes = value.get<std::size_t>();
      else if (key == "head_accuracies") s.head_accuracies = value.get<std::vector<double>>();
      else if (key == "head_budgets") s.head_budgets = value.get<std::vector<double>>();
      else if (key == "confidence_sharpness") s.confidence_sharpness = value.get<double>();
      else if (key == "logit_noise") s.logit_noise = value.get<double>();
      else if (key == "difficulty_correlation") s.difficulty_correlation = value.get<double>();
      else if (key == "n_train") s.n_train = value.get<std::size_t>();
      else if (key == "n_calib") s.n_calib = value.get<std::size_t>();
      else if (key == "n_test") s.n_test = value.get<std::size_t>();
      else throw Error(ErrorCode::InvalidSpec, "unknown synth spec key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  s.validate();
  return s;
}

Json to_json(const SynthSpec& s) {
  Json j;
  j["seed"] = s.seed;
  j["num_classes"] = s.num_classes;
  j["head_accuracies"] = s.head_accuracies;
  j["head_budgets"] = s.head_budgets;
  j["confidence_sharpness"] = s.confidence_sharpness;
  j["logit_noise"] = s.logit_noise;
  j["difficulty_correlation"] = s.difficulty_correlation;
  j["n_train"] = s.n_train;
  j["n_calib"] = s.n_calib;
  j["n_test"] = s.n_test;
  return j;
}

Json to_json(const CalibrationRecord& r) {
  Json j;
  j["format"] = "eero-policy";
  j["version"] = 1;
  j["budget"] = to_json(r.budget);
  j["beta"] = r.beta;
  j["risks"] = r.risks;
  j["prior"] = r.prior;
  j["allocation"] = to_json(r.allocation);
  j["policy"] = to_json(r.policy);
  return j;
}

CalibrationRecord calibration_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "eero-policy") json_error("not an eero policy document");
  CalibrationRecord r;
  r.budget = budget_from_json(json_get<Json>(j, "budget", "policy document"));
  r.beta = json_get<double>(j, "beta", "policy document");
  r.risks = json_get<std::vector<double>>(j, "risks", "policy document");
  r.prior = json_get<std::vector<double>>(j, "prior", "policy document");
  r.allocation = allocation_from_json(json_get<Json>(j, "allocation", "policy document"));
  r.policy = policy_from_json(json_get<Json>(j, "policy", "policy document"));
  return r;
}

Json summary_json(const BatchResult& result, const std::optional<BudgetReport>& report) {
  Json j;
  j["oracle"] = false;
  j["num_instances"] = result.batch_size();
  j["num_heads"] = result.exit_proportions.size();
  j["consumed_budget"] = result.consumed_budget;
  j["allowed_budget"] = report ? Json(report->allowed) : Json(nullptr);
  j["utilization"] = report ? Json(report->utilization) : Json(nullptr);
  j["within_budget"] = report ? Json(report->within_budget) : Json(nullptr);
  j["accuracy"] = result.accuracy ? Json(*result.accuracy) : Json(nullptr);
  j["exit_proportions"] = result.exit_proportions;
  return j;
}

Json summary_json(const OracleResult& result, std::size_t num_heads, double budget) {
  Json j;
  j["oracle"] = true;
  j["num_instances"] = result.assignment.size();
  j["num_heads"] = num_heads;
  j["consumed_budget"] = result.cost;
  j["allowed_budget"] = budget;
  j["utilization"] = result.cost / budget;
  j["within_budget"] = result.cost <= budget;
  j["accuracy"] = result.accuracy;
  j["exit_proportions"] = exit_proportions_of(result.assignment, num_heads);
  return j;
}

void validate_summary_json(const Json& j) {
  static const char* const kKeys[] = {"oracle",      "num_instances", "num_heads",     "consumed_budget", "allowed_budget",
                                      "utilization", "within_budget", "accuracy",      "exit_proportions"};
  if (!j.is_object()) json_error("summary must be an object");
  if (j.size() != std::size(kKeys)) json_error("summary has " + std::to_string(j.size()) + " keys");
  std::size_t position = 0;
  for (const auto& [key, value] : j.items()) {
    if (key != kKeys[position++]) json_error("unexpected key '" + key + "' at position " + std::to_string(position));
  }
  if (!j["oracle"].is_boolean()) json_error("oracle must be boolean");
  if (!j["num_instances"].is_number_unsigned() || j["num_instances"].get<std::size_t>() == 0) {
    json_error("num_instances must be a positive integer");
  }
  if (!j["num_heads"].is_number_unsigned() || j["num_heads"].get<std::size_t>() == 0) {
    json_error("num_heads must be a positive integer");
  }
  if (!j["consumed_budget"].is_number() || j["consumed_budget"].get<double>() < 0.0) {
    json_error("consumed_budget must be a non-negative number");
  }
  for (const char* key : {"allowed_budget", "utilization"}) {
    if (!(j[key].is_null() || j[key].is_number())) json_error(std::string(key) + " must be a number or null");
  }
  if (!(j["within_budget"].is_null() || j["within_budget"].is_boolean())) json_error("within_budget must be bool or null");
  if (j["allowed_budget"].is_null() != j["within_budget"].is_null()) {
    json_error("allowed_budget and within_budget must be both present or both null");
  }
  if (!j["accuracy"].is_null()) {
    if (!j["accuracy"].is_number()) json_error("accuracy must be a number or null");
    const double a = j["accuracy"].get<double>();
    if (a < 0.0 || a > 1.0) json_error("accuracy outside [0, 1]");
  }
  const auto& props = j["exit_proportions"];
  if (!props.is_array() || props.size() != j["num_heads"].get<std::size_t>()) {
    json_error("exit_proportions must have num_heads entries");
  }
  double total = 0.0;
  for (const auto& p : props) {
    if (!p.is_number() || p.get<double>() < 0.0) json_error("exit proportions must be non-negative numbers");
    total += p.get<double>();
  }
  if (std::abs(total - 1.0) > 1e-9) json_error("exit proportions sum to " + std::to_string(total));
}

std::string per_instance_csv(const BatchResult& result, std::span<const std::int64_t> instance_ids,
                             const std::optional<std::vector<std::size_t>>& labels) {
  std::string out = "instance_id,exit_head,prediction,cost,correct\n";
  for (std::size_t i = 0; i < result.batch_size(); ++i) {
    out += std::to_string(i < instance_ids.size() ? instance_ids[i] : static_cast<std::int64_t>(i));
    out += ',' + std::to_string(result.exits[i] + 1);
    out += ',' + std::to_string(result.predictions[i] + 1);
    out += ',' + format_double(result.per_instance_cost[i]);
    out += ',';
    if (labels) out += result.predictions[i] == (*labels)[i] ? "1" : "0";
    out += '\n';
  }
  return out;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out(kSweepHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_double(r.budget) + ',';
    if (r.accuracy) out += format_double(*r.accuracy);
    out += ',' + format_double(r.consumed) + ',' + (r.within_budget ? "true" : "false") + ',' + r.source + '\n';
  }
  return out;
}

}  // namespace eero
