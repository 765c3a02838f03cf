#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "selemb/loaders.hpp"
#include "selemb/nn.hpp"

namespace selemb::bench {

struct StrategySpec {
  std::string kind;  // "single" | "parallel" | "selective"
  std::optional<std::string> source;           // single only; absent = every source
  loaders::SelectiveMode mode = loaders::SelectiveMode::by_segment;  // selective only
};

struct SplitSpec {
  std::string kind = "holdout";  // "holdout" | "kfold" | "domain"
  loaders::HoldoutFractions fractions;
  size_t k = 5;
  loaders::DomainSplitSpec domains;
};

struct ExperimentConfig {
  std::string manifest_path;
  std::vector<StrategySpec> strategies;
  SplitSpec split;
  size_t segment_length = signal::kDefaultSegmentLength;
  signal::StandardizeMode standardize = signal::StandardizeMode::none;
  // When a domain split names no validation domains, this fraction of the
  // training examples is carved off (seeded) for epoch selection.
  double val_carve_fraction = 0.1;
  nn::TrainConfig train;
  bool use_cache = false;
  bool parallel_runs = false;

  void validate() const;
};

// One Table-style row: a (strategy, variant) pair aggregated over the
// repeat runs.
struct StrategyResult {
  std::string strategy;
  std::string variant;
  std::vector<double> run_accuracies;     // fraction in [0,1], index = run
  std::vector<double> run_train_times_s;  // same order
  std::vector<size_t> diverged_runs;      // excluded from the stats
  double build_time_s = 0.0;
  size_t train_examples = 0, val_examples = 0, test_examples = 0;
  size_t channels = 1;
  size_t feature_width = 0;
  bool timings_reliable = true;

  size_t runs() const { return run_accuracies.size(); }
  double accuracy_mean() const;
  double accuracy_std() const;  // population
  double train_time_mean_s() const;
};

struct RunReport {
  std::string dataset_name;
  std::string model = "cnn";
  uint64_t seed = 0;
  size_t repeats = 0;
  std::string split_description;
  std::vector<StrategyResult> rows;
};

// Builds datasets per strategy, enforces the leakage and count-identity
// checks, then trains/evaluates the repeat runs with seeds seed+run.
// Split membership is identical across strategies so comparisons are paired.
RunReport run_experiment(const ExperimentConfig& config);

enum class ReportFormat { text, csv, jsonl, json };

ReportFormat report_format_from_string(const std::string& name);

// Deterministic column order: strategy, variant, runs, acc_mean_pct,
// acc_std_pct, build_time_s, train_time_s. Percentages get 2 decimals,
// seconds 1. Timing fields are not deterministic across runs.
void emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& path);
std::string render_report(const RunReport& report, ReportFormat format);

// Long-form accuracy table: one row per (dataset, model, strategy, variant,
// run), ready for external box/radar plotting.
void emit_plot_data(const std::vector<RunReport>& reports, const std::filesystem::path& path);

RunReport report_from_json(const std::string& json_text);

// Config JSON (schema in docs/FORMATS.md). Unknown keys are rejected.
ExperimentConfig config_from_json(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig default_config();

}  // namespace selemb::bench
