#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "selemb/bench.hpp"
#include "selemb/errors.hpp"
#include "selemb/ingest.hpp"
#include "selemb/synth.hpp"

using namespace selemb;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("selemb-bench-" + std::to_string(std::random_device{}() % 1000000));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// One tiny benchmark shared by the whole suite; building it once keeps the
// file under a minute.
const fs::path& tiny_benchmark() {
  static TempDir dir;
  static bool built = false;
  if (!built) {
    auto opts = synth::default_benchmark_options();
    opts.duration_s = 1.2;  // 12 segments per file per source
    opts.seed = 5;
    synth::generate_benchmark(opts, dir.path);
    built = true;
  }
  return dir.path;
}

bench::ExperimentConfig tiny_config() {
  bench::ExperimentConfig config = bench::default_config();
  config.manifest_path = (tiny_benchmark() / "manifest.json").string();
  config.split.kind = "domain";
  config.split.domains.train_domains = {"D0", "D1"};
  config.split.domains.test_domains = {"D2"};
  config.train.epochs = 1;
  config.train.repeats = 2;
  config.train.batch_size = 32;
  config.train.seed = 42;
  return config;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// timing columns carry wall-clock noise; blank them before comparing
std::string mask_timing_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const size_t first = line.rfind(',', line.rfind(',') - 1);
    out << line.substr(0, first) << "\n";
  }
  return out.str();
}

std::string mask_timing_jsonl(const std::string& jsonl) {
  std::string masked = std::regex_replace(
      jsonl, std::regex(R"("build_time_s":[^,]*,"train_time_s":[^,]*,)"), "");
  masked = std::regex_replace(masked, std::regex(R"("train_times_s":\[[^\]]*\],)"), "");
  return masked;
}

}  // namespace

TEST_CASE("run_experiment produces one row per strategy variant with paired counts") {
  const auto report = bench::run_experiment(tiny_config());
  REQUIRE(report.rows.size() == 4);  // single:s0, single:s1, parallel, selective
  CHECK(report.rows[0].strategy == "single");
  CHECK(report.rows[0].variant == "s0");
  CHECK(report.rows[1].variant == "s1");
  CHECK(report.rows[2].strategy == "parallel");
  CHECK(report.rows[3].strategy == "selective");
  CHECK(report.rows[3].variant == "segment");

  for (const auto& row : report.rows) {
    CHECK(row.runs() == 2);
    CHECK(row.run_accuracies.size() == 2);
    CHECK(row.build_time_s >= 0.0);
    CHECK(row.train_time_mean_s() > 0.0);
    // equal example counts across strategies (count identity)
    CHECK(row.train_examples == report.rows[0].train_examples);
    CHECK(row.val_examples == report.rows[0].val_examples);
    CHECK(row.test_examples == report.rows[0].test_examples);
  }
  // parallel pays m-fold feature volume at equal example count
  CHECK(report.rows[2].channels == 2);
  CHECK(report.rows[3].channels == 1);
  CHECK(report.rows[2].feature_width == report.rows[3].feature_width);

  // mean/std recompute exactly from the per-run accuracies
  for (const auto& row : report.rows) {
    double mean = 0.0;
    for (double a : row.run_accuracies) mean += a;
    mean /= static_cast<double>(row.run_accuracies.size());
    double var = 0.0;
    for (double a : row.run_accuracies) var += (a - mean) * (a - mean);
    const double std_dev = std::sqrt(var / static_cast<double>(row.run_accuracies.size()));
    CHECK(std::abs(row.accuracy_mean() - mean) < 1e-12);
    CHECK(std::abs(row.accuracy_std() - std_dev) < 1e-12);
  }
}

TEST_CASE("single repeat reports zero std") {
  auto config = tiny_config();
  config.train.repeats = 1;
  config.strategies = {{"selective", std::nullopt, loaders::SelectiveMode::by_segment}};
  const auto report = bench::run_experiment(config);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].runs() == 1);
  CHECK(report.rows[0].accuracy_std() == 0.0);
}

TEST_CASE("holdout split experiment keeps membership paired across strategies") {
  auto config = tiny_config();
  config.split = bench::SplitSpec{};  // holdout 0.7/0.2/0.1
  config.train.repeats = 1;
  const auto report = bench::run_experiment(config);
  // 4 classes x 3 domains x 12 segments = 144 examples; largest-remainder
  // on (0.7, 0.2, 0.1) gives 101/29/14
  CHECK(report.rows[0].train_examples == 101);
  CHECK(report.rows[0].val_examples == 29);
  CHECK(report.rows[0].test_examples == 14);
  for (const auto& row : report.rows) {
    CHECK(row.train_examples == report.rows[0].train_examples);
    CHECK(row.test_examples == report.rows[0].test_examples);
  }
}

TEST_CASE("holdout splits select identical file/segment membership across strategies") {
  auto config = tiny_config();
  config.split = bench::SplitSpec{};
  config.train.repeats = 1;

  // reconstruct the strategy datasets and splits the way run_experiment does
  const auto manifest = ingest::load_manifest(config.manifest_path);
  const auto recordings = ingest::read_all(manifest);
  const loaders::BuildOptions opt{config.segment_length, config.standardize};
  const auto single = loaders::build_single(recordings, "s0", manifest.class_count(), opt);
  const auto selective = loaders::build_selective(recordings, loaders::SelectiveMode::by_segment,
                                                  manifest.class_count(), opt);
  const auto split_a = loaders::split_holdout(single, config.split.fractions, config.train.seed);
  const auto split_b = loaders::split_holdout(selective, config.split.fractions, config.train.seed);

  auto membership = [](const loaders::Dataset& ds) {
    std::multiset<std::pair<std::string, size_t>> keys;
    for (const auto& ex : ds.examples) keys.insert({ex.prov.file_id, ex.prov.segment_index});
    return keys;
  };
  CHECK(membership(split_a.train) == membership(split_b.train));
  CHECK(membership(split_a.val) == membership(split_b.val));
  CHECK(membership(split_a.test) == membership(split_b.test));
}

TEST_CASE("diverged runs are excluded and flagged") {
  auto config = tiny_config();
  config.strategies = {{"selective", std::nullopt, loaders::SelectiveMode::by_segment}};
  config.train.lr = 1e308;
  const auto report = bench::run_experiment(config);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].diverged_runs.size() == 2);
  CHECK(report.rows[0].run_accuracies.empty());
  // report still renders
  const auto csv = bench::render_report(report, bench::ReportFormat::csv);
  CHECK(csv.find("selective,segment,0,") != std::string::npos);
}

TEST_CASE("kfold experiment runs one fold per run") {
  auto config = tiny_config();
  config.split.kind = "kfold";
  config.split.k = 3;
  config.strategies = {{"selective", std::nullopt, loaders::SelectiveMode::by_segment}};
  const auto report = bench::run_experiment(config);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].runs() == 3);  // one run per fold
}

TEST_CASE("explicit val domains are honored and leakage-checked") {
  auto config = tiny_config();
  config.split.domains.train_domains = {"D0"};
  config.split.domains.val_domains = {"D1"};
  config.split.domains.test_domains = {"D2"};
  config.strategies = {{"single", "s0", loaders::SelectiveMode::by_segment}};
  const auto report = bench::run_experiment(config);
  CHECK(report.rows[0].val_examples == 4 * 12);
}

TEST_CASE("unknown strategy and bad config are rejected") {
  auto config = tiny_config();
  config.strategies = {{"mystery", std::nullopt, loaders::SelectiveMode::by_segment}};
  CHECK_THROWS_AS(bench::run_experiment(config), Error);

  CHECK_THROWS_AS(bench::config_from_json(R"({"unknown_key": 1})"), Error);
  CHECK_THROWS_AS(bench::config_from_json(R"({"train": {"epoch": 3}})"), Error);
  CHECK_THROWS_AS(bench::config_from_json("not json"), Error);
}

TEST_CASE("config json round-trips") {
  auto config = tiny_config();
  config.standardize = signal::StandardizeMode::per_segment_zscore;
  config.train.lr = 0.005;
  const auto text = bench::config_to_json(config);
  const auto back = bench::config_from_json(text);
  CHECK(back.manifest_path == config.manifest_path);
  CHECK(back.split.kind == "domain");
  CHECK(back.split.domains.train_domains == config.split.domains.train_domains);
  CHECK(back.train.lr == 0.005);
  CHECK(back.train.repeats == config.train.repeats);
  CHECK(back.standardize == signal::StandardizeMode::per_segment_zscore);
  CHECK(back.strategies.size() == config.strategies.size());
}

TEST_CASE("csv report renders, round-trips, and handles the empty case") {
  const auto report = bench::run_experiment(tiny_config());
  const std::string csv = bench::render_report(report, bench::ReportFormat::csv);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "strategy,variant,runs,acc_mean_pct,acc_std_pct,build_time_s,train_time_s");
  size_t rows = 0;
  std::string line;
  while (std::getline(lines, line)) {
    ++rows;
    std::istringstream cells(line);
    std::string strategy, variant, runs, mean, stddev;
    std::getline(cells, strategy, ',');
    std::getline(cells, variant, ',');
    std::getline(cells, runs, ',');
    std::getline(cells, mean, ',');
    std::getline(cells, stddev, ',');
    const size_t row_index = rows - 1;
    CHECK(strategy == report.rows[row_index].strategy);
    CHECK(std::abs(std::stod(mean) - report.rows[row_index].accuracy_mean() * 100.0) <= 0.005);
    CHECK(std::abs(std::stod(stddev) - report.rows[row_index].accuracy_std() * 100.0) <= 0.005);
  }
  CHECK(rows == report.rows.size());

  bench::RunReport empty;
  empty.dataset_name = "none";
  const std::string empty_csv = bench::render_report(empty, bench::ReportFormat::csv);
  CHECK(empty_csv == "strategy,variant,runs,acc_mean_pct,acc_std_pct,build_time_s,train_time_s\n");
}

TEST_CASE("full json report round-trips through report_from_json") {
  const auto report = bench::run_experiment(tiny_config());
  const auto text = bench::render_report(report, bench::ReportFormat::json);
  const auto back = bench::report_from_json(text);
  CHECK(back.dataset_name == report.dataset_name);
  REQUIRE(back.rows.size() == report.rows.size());
  for (size_t i = 0; i < back.rows.size(); ++i) {
    CHECK(back.rows[i].strategy == report.rows[i].strategy);
    CHECK(back.rows[i].run_accuracies.size() == report.rows[i].run_accuracies.size());
    CHECK(std::abs(back.rows[i].accuracy_mean() - report.rows[i].accuracy_mean()) < 1e-12);
  }
}

TEST_CASE("reports are deterministic modulo timing fields") {
  const auto a = bench::run_experiment(tiny_config());
  const auto b = bench::run_experiment(tiny_config());
  CHECK(mask_timing_csv(bench::render_report(a, bench::ReportFormat::csv)) ==
        mask_timing_csv(bench::render_report(b, bench::ReportFormat::csv)));
  CHECK(mask_timing_jsonl(bench::render_report(a, bench::ReportFormat::jsonl)) ==
        mask_timing_jsonl(bench::render_report(b, bench::ReportFormat::jsonl)));
}

TEST_CASE("parallel repeat runs reproduce sequential accuracies") {
  auto config = tiny_config();
  config.strategies = {{"selective", std::nullopt, loaders::SelectiveMode::by_segment}};
  const auto sequential = bench::run_experiment(config);
  config.parallel_runs = true;
  const auto threaded = bench::run_experiment(config);
  CHECK(threaded.rows[0].run_accuracies == sequential.rows[0].run_accuracies);
  CHECK_FALSE(threaded.rows[0].timings_reliable);
  CHECK(sequential.rows[0].timings_reliable);
}

TEST_CASE("plot data is one row per dataset strategy run and groups back to the means") {
  TempDir dir;
  auto report_a = bench::run_experiment(tiny_config());
  auto report_b = report_a;
  report_b.dataset_name = "second";

  const auto path = dir.path / "plot.csv";
  bench::emit_plot_data({report_a, report_b}, path);
  std::istringstream in(slurp(path));
  std::string header;
  std::getline(in, header);
  CHECK(header == "dataset,model,strategy,variant,run,acc_pct");

  std::map<std::string, std::pair<double, size_t>> groups;
  std::string line;
  size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream cells(line);
    std::string dataset, model, strategy, variant, run, acc;
    std::getline(cells, dataset, ',');
    std::getline(cells, model, ',');
    std::getline(cells, strategy, ',');
    std::getline(cells, variant, ',');
    std::getline(cells, run, ',');
    std::getline(cells, acc, ',');
    auto& [sum, count] = groups[dataset + "/" + strategy + "/" + variant];
    sum += std::stod(acc);
    count += 1;
  }
  // 2 datasets x 4 strategy-variants x 2 runs
  CHECK(rows == 2 * 4 * 2);
  for (const auto& row : report_a.rows) {
    const auto& [sum, count] = groups[report_a.dataset_name + "/" + row.strategy + "/" + row.variant];
    CHECK(count == row.runs());
    CHECK(std::abs(sum / static_cast<double>(count) - row.accuracy_mean() * 100.0) < 1e-6);
  }
}

TEST_CASE("emit_report writes all formats to disk") {
  TempDir dir;
  const auto report = bench::run_experiment(tiny_config());
  for (const char* format : {"text", "csv", "jsonl", "json"}) {
    const auto path = dir.path / (std::string("report.") + format);
    bench::emit_report(report, bench::report_format_from_string(format), path);
    CHECK(fs::file_size(path) > 0);
  }
  CHECK_THROWS_AS(bench::report_format_from_string("yaml"), Error);
}
